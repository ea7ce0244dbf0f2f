// Command-line front end: check / dualize / transform / list.

#include "genfun/scenario.hpp"

#include <boost/program_options.hpp>

#include <filesystem>
#include <iostream>

namespace po = boost::program_options;
using namespace genfun;

namespace {

constexpr int kExitConfig = 3;
constexpr int kExitIO = 4;

void usage(std::ostream& os, const po::options_description& opts) {
  os << "usage:\n"
        "  genfun_cli check <config.ini> [--output DIR]\n"
        "  genfun_cli dualize <config.ini> [--output FILE] [--samples N]\n"
        "  genfun_cli transform <config.ini> <in.csv> [--output FILE]\n"
        "  genfun_cli list\n\n"
     << opts << "\nGENFUN_THREADS caps the number of worker threads.\n"
     << "check exit codes: 0 all hold, 1 some check fails, 2 inconclusive, 3 config error, 4 I/O error.\n";
}

std::string output_path(const std::string& opt, const ScenarioConfig& cfg, const char* file) {
  if (!opt.empty()) return opt;
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / file).string();
}

int cmd_check(const std::string& config, const std::string& output) {
  ScenarioConfig cfg = load_config(config);
  if (!output.empty()) cfg.output_dir = output;
  const RunReport rr = run_scenario(cfg);
  emit_report(rr, cfg.output_dir);
  for (const auto& o : rr.outcomes)
    std::cout << o.report.condition_id << ' ' << to_string(o.report.verdict) << " margin=" << fmt17(o.report.margin)
              << (o.error ? " error: " + *o.error : std::string()) << '\n';
  std::cout << "overall " << to_string(rr.overall) << " (report: "
            << (std::filesystem::path(cfg.output_dir) / "report.json").string() << ")\n";
  return rr.exit_code;
}

int cmd_dualize(const std::string& config, const std::string& output, int samples) {
  const ScenarioConfig cfg = load_config(config);
  const Scenario s = resolve(cfg);
  const auto rows = sample_gstar_table(s.gf, samples > 0 ? samples : cfg.samples, cfg.seed);
  const std::string path = output_path(output, cfg, "dualize.csv");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IOError, "cannot open '" + path + "' for writing");
  write_gstar_table(f, rows, s.gf.dim);
  std::cout << "wrote " << rows.size() << " rows to " << path << '\n';
  return 0;
}

int cmd_transform(const std::string& config, const std::string& input, const std::string& output) {
  const ScenarioConfig cfg = load_config(config);
  const Scenario s = resolve(cfg);
  const SampledFunction u = read_sampled_function(input);
  if (u.grid.dim() != s.gf.dim) throw Error(ErrorKind::IOError, input + ": dimension does not match the generating function");
  const Grid yg = Grid::uniform(s.gf.gamma.y_box, cfg.y_grid);
  const TransformResult t = g_transform_full(s.gf, u, yg);
  const std::string path = output_path(output, cfg, "transform.csv");
  write_sampled_function(path, t.v);
  std::cout << "wrote g-transform on " << yg.size() << " nodes to " << path << " (clipped fraction "
            << fmt17(t.clipped_fraction()) << ")\n";
  return 0;
}

int cmd_list() {
  for (const auto& e : list_catalog()) {
    std::cout << e.id << "\n  " << e.description << "\n  params:";
    for (const auto& [k, v] : e.defaults) std::cout << ' ' << k << '=' << fmt17(v);
    std::cout << '\n';
    for (const auto& kp : e.known_properties)
      std::cout << "  " << kp.condition << ": " << kp.expected << " [" << kp.provenance << "]\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()("help,h", "show this help")("output,o", po::value<std::string>()->default_value(""),
                                                   "output directory (check) or file (dualize, transform)")(
      "samples", po::value<int>()->default_value(0), "rows for dualize (default: [run] samples)");
  po::options_description hidden;
  hidden.add_options()("command", po::value<std::string>())("args", po::value<std::vector<std::string>>());
  po::options_description all;
  all.add(opts).add(hidden);
  po::positional_options_description pos;
  pos.add("command", 1).add("args", -1);

  po::variables_map vm;
  try {
    po::store(po::command_line_parser(argc, argv).options(all).positional(pos).run(), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    usage(std::cerr, opts);
    return kExitConfig;
  }
  if (vm.count("help") || !vm.count("command")) {
    usage(vm.count("help") ? std::cout : std::cerr, opts);
    return vm.count("help") ? 0 : kExitConfig;
  }
  const std::string cmd = vm["command"].as<std::string>();
  const auto args = vm.count("args") ? vm["args"].as<std::vector<std::string>>() : std::vector<std::string>{};
  const std::string output = vm["output"].as<std::string>();
  auto need = [&](std::size_t n) {
    if (args.size() != n) {
      std::cerr << "error: '" << cmd << "' expects " << n << " argument(s)\n";
      usage(std::cerr, opts);
      return false;
    }
    return true;
  };
  try {
    if (cmd == "list") return need(0) ? cmd_list() : kExitConfig;
    if (cmd == "check") return need(1) ? cmd_check(args[0], output) : kExitConfig;
    if (cmd == "dualize") return need(1) ? cmd_dualize(args[0], output, vm["samples"].as<int>()) : kExitConfig;
    if (cmd == "transform") return need(2) ? cmd_transform(args[0], args[1], output) : kExitConfig;
    std::cerr << "error: unknown command '" << cmd << "'\n";
    usage(std::cerr, opts);
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? kExitConfig : kExitIO;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIO;
  }
}
