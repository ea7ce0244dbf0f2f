#pragma once

#include "genfun/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace genfun {

enum class Verdict { holds, fails, inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

/// Named numeric fields describing the configuration that attains a margin.
struct Witness {
  std::vector<std::pair<std::string, std::vector<double>>> fields;

  Witness& add(std::string name, const Vec& v) {
    fields.emplace_back(std::move(name), std::vector<double>(v.data(), v.data() + v.size()));
    return *this;
  }
  Witness& add(std::string name, double v) {
    fields.emplace_back(std::move(name), std::vector<double>{v});
    return *this;
  }

  const std::vector<double>* find(std::string_view name) const {
    for (const auto& [k, v] : fields)
      if (k == name) return &v;
    return nullptr;
  }
  double scalar(std::string_view name) const {
    const auto* v = find(name);
    return (v && !v->empty()) ? v->front() : std::numeric_limits<double>::quiet_NaN();
  }
  Vec vector(std::string_view name) const {
    const auto* v = find(name);
    if (!v) return {};
    return Eigen::Map<const Vec>(v->data(), static_cast<Eigen::Index>(v->size()));
  }
};

/// Outcome of any condition or property check. `margin` is signed with
/// positive meaning "satisfied with slack"; its precise meaning is documented
/// on each check.
struct ConditionReport {
  std::string condition_id;
  Verdict verdict = Verdict::inconclusive;
  double margin = 0.0;
  std::optional<Witness> witness;
  long samples_used = 0;
  std::uint64_t seed = 0;
  bool vacuous = false;
  /// Additional named measurements (delta_hat, allowance, clipped fraction...).
  std::vector<std::pair<std::string, double>> extras;
  std::vector<std::string> notes;

  ConditionReport& extra(std::string name, double v) {
    extras.emplace_back(std::move(name), v);
    return *this;
  }
  double extra_value(std::string_view name) const {
    for (const auto& [k, v] : extras)
      if (k == name) return v;
    return std::numeric_limits<double>::quiet_NaN();
  }
  bool holds() const { return verdict == Verdict::holds; }
  bool fails() const { return verdict == Verdict::fails; }
};

/// Report for a check that has nothing to test (e.g. co-dimension one
/// directions in dimension 1).
inline ConditionReport vacuous_report(std::string id, std::uint64_t seed = 0) {
  ConditionReport r;
  r.condition_id = std::move(id);
  r.verdict = Verdict::holds;
  r.margin = kLargestFinite;
  r.vacuous = true;
  r.seed = seed;
  return r;
}

}  // namespace genfun
