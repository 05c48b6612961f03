#pragma once
// Bootstrap assessment protocol: resample sets of generations, predict a
// type per set, aggregate into a 16-type distribution, and compare
// distributions across roles.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbti/corpus.hpp"
#include "mbti/detector.hpp"
#include "mbti/types.hpp"

namespace mbti {

struct EmptyPool : std::runtime_error {
  EmptyPool() : std::runtime_error("generation pool is empty") {}
};
struct EmptyDistribution : std::runtime_error {
  EmptyDistribution() : std::runtime_error("distribution has no observations") {}
};
struct DegenerateSupport : std::runtime_error {
  explicit DegenerateSupport(const std::string& what) : std::runtime_error(what) {}
};

struct BootstrapPlan {
  uint32_t n_sets = 100;
  uint32_t set_size = 50;
  uint64_t seed = 0;

  BootstrapPlan() = default;
  BootstrapPlan(uint32_t sets, uint32_t size, uint64_t s) : n_sets(sets), set_size(size), seed(s) {
    if (sets == 0 || size == 0) throw std::invalid_argument("plan sizes must be positive");
  }
};

struct PersonalityDistribution {
  std::map<MbtiType, uint64_t> counts;
  uint64_t n_sets = 0;
};

struct DisplayDistribution {
  std::map<MbtiType, uint64_t> retained;
  uint64_t others = 0;
  uint64_t threshold = 3;
};

struct ChiSquareResult {
  double statistic = 0.0;
  uint64_t degrees_of_freedom = 0;
  double p_value = 1.0;
};

struct ConsistencyReport {
  MbtiType mode_a, mode_b;
  std::optional<MbtiType> second_mode_a, second_mode_b;
  bool mode_match = false;
  double tv_distance = 0.0;
  std::optional<ChiSquareResult> chi_square;  // absent on degenerate support
};

// n_sets sets of set_size texts drawn uniformly with replacement. Set k
// is seeded with a stable hash of (seed, k), so sets are reproducible
// independent of evaluation order.
std::vector<DocumentSet> resample(const std::vector<GeneratedText>& pool,
                                  const BootstrapPlan& plan);

// One prediction per resampled set, counts aggregated. parallelism > 1
// evaluates sets concurrently; the result is identical either way.
PersonalityDistribution assess(const std::vector<GeneratedText>& pool, const Detector& detector,
                               const BootstrapPlan& plan, uint32_t parallelism = 1);

// Display-time merge: types with count < threshold fold into Others.
DisplayDistribution merge_others(const PersonalityDistribution& d, uint64_t threshold = 3);

// Top two types by count, ties broken lexicographically by code; second
// is absent when only one type occurs.
std::pair<MbtiType, std::optional<MbtiType>> mode_types(const PersonalityDistribution& d);

// Total variation distance between the normalized distributions.
double tv_distance(const PersonalityDistribution& a, const PersonalityDistribution& b);

// Chi-square homogeneity test on the union support, rare categories
// pooled until every expected count is >= 5.
ChiSquareResult chi_square_homogeneity(const PersonalityDistribution& a,
                                       const PersonalityDistribution& b);

ConsistencyReport compare(const PersonalityDistribution& a, const PersonalityDistribution& b);

// Upper-tail chi-square p-value; exposed for tests.
double chi_square_sf(double statistic, uint64_t degrees_of_freedom);

// --- persistence ---------------------------------------------------------

// JSON round-trip; save embeds plan metadata plus caller-supplied
// provenance fields (config hash, seed).
void save_distribution(const std::string& path, const PersonalityDistribution& d,
                       const BootstrapPlan& plan,
                       const std::map<std::string, std::string>& provenance = {});
PersonalityDistribution load_distribution(const std::string& path);

// Pie-chart export: CSV rows type,count,fraction with rare types merged.
void save_display_csv(const std::string& path, const DisplayDistribution& d);

std::string consistency_report_to_json(const ConsistencyReport& r);
std::string consistency_report_to_text(const ConsistencyReport& r);

}  // namespace mbti
