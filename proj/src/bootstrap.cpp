#include "mbti/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mbti/hash.hpp"

namespace mbti {

std::vector<DocumentSet> resample(const std::vector<GeneratedText>& pool,
                                  const BootstrapPlan& plan) {
  if (pool.empty()) throw EmptyPool();

  std::vector<DocumentSet> sets;
  sets.reserve(plan.n_sets);
  for (uint32_t k = 0; k < plan.n_sets; ++k) {
    std::mt19937_64 rng(derive_seed(plan.seed, k));
    DocumentSet set;
    set.documents.reserve(plan.set_size);
    for (uint32_t i = 0; i < plan.set_size; ++i) {
      set.documents.push_back(pool[bounded_draw(rng, pool.size())].text);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

PersonalityDistribution assess(const std::vector<GeneratedText>& pool, const Detector& detector,
                               const BootstrapPlan& plan, uint32_t parallelism) {
  const auto sets = resample(pool, plan);

  std::vector<MbtiType> predictions(sets.size());
  std::vector<std::string> errors(sets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= sets.size()) return;
      try {
        predictions[i] = detector.predict(sets[i]).mbti;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const uint32_t n_threads = std::max<uint32_t>(parallelism, 1);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (uint32_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error("detector failed on set " + std::to_string(i) + ": " + errors[i]);
    }
  }

  PersonalityDistribution dist;
  dist.n_sets = sets.size();
  for (const auto& p : predictions) ++dist.counts[p];
  return dist;
}

DisplayDistribution merge_others(const PersonalityDistribution& d, uint64_t threshold) {
  DisplayDistribution out;
  out.threshold = threshold;
  for (const auto& [type, count] : d.counts) {
    if (count < threshold) out.others += count;
    else out.retained.emplace(type, count);
  }
  return out;
}

std::pair<MbtiType, std::optional<MbtiType>> mode_types(const PersonalityDistribution& d) {
  if (d.n_sets == 0 || d.counts.empty()) throw EmptyDistribution();

  // counts is keyed by MbtiType whose ordering follows the dense index,
  // not the code; sort explicitly by (count desc, code asc).
  std::vector<std::pair<MbtiType, uint64_t>> entries(d.counts.begin(), d.counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first.code() < b.first.code();
  });
  std::optional<MbtiType> second;
  if (entries.size() > 1) second = entries[1].first;
  return {entries[0].first, second};
}

double tv_distance(const PersonalityDistribution& a, const PersonalityDistribution& b) {
  if (a.n_sets == 0 || b.n_sets == 0) throw EmptyDistribution();
  double sum = 0.0;
  for (const auto type : all_types()) {
    const auto ia = a.counts.find(type);
    const auto ib = b.counts.find(type);
    const double pa = ia == a.counts.end() ? 0.0 : static_cast<double>(ia->second) / a.n_sets;
    const double pb = ib == b.counts.end() ? 0.0 : static_cast<double>(ib->second) / b.n_sets;
    sum += std::abs(pa - pb);
  }
  return 0.5 * sum;
}

namespace {

// Regularized incomplete gamma functions (series + continued fraction).
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  double ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_sf(double statistic, uint64_t degrees_of_freedom) {
  if (statistic <= 0.0) return 1.0;
  const double a = static_cast<double>(degrees_of_freedom) / 2.0;
  const double x = statistic / 2.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

ChiSquareResult chi_square_homogeneity(const PersonalityDistribution& a,
                                       const PersonalityDistribution& b) {
  if (a.n_sets == 0 || b.n_sets == 0) throw EmptyDistribution();
  const double na = static_cast<double>(a.n_sets);
  const double nb = static_cast<double>(b.n_sets);
  const double total = na + nb;

  // Union support, pooled counts.
  struct Cat {
    double ca = 0.0, cb = 0.0;
    double pooled() const { return ca + cb; }
  };
  std::vector<Cat> cats;
  for (const auto type : all_types()) {
    const auto ia = a.counts.find(type);
    const auto ib = b.counts.find(type);
    Cat c;
    c.ca = ia == a.counts.end() ? 0.0 : static_cast<double>(ia->second);
    c.cb = ib == b.counts.end() ? 0.0 : static_cast<double>(ib->second);
    if (c.pooled() > 0.0) cats.push_back(c);
  }

  // Pool rare categories until every expected cell count is >= 5.
  auto min_expected = [&](const Cat& c) {
    return std::min(na, nb) * c.pooled() / total;
  };
  std::sort(cats.begin(), cats.end(),
            [](const Cat& x, const Cat& y) { return x.pooled() < y.pooled(); });
  while (cats.size() > 2 && min_expected(cats.front()) < 5.0) {
    cats[1].ca += cats[0].ca;
    cats[1].cb += cats[0].cb;
    cats.erase(cats.begin());
    std::sort(cats.begin(), cats.end(),
              [](const Cat& x, const Cat& y) { return x.pooled() < y.pooled(); });
  }
  if (cats.size() < 2) {
    throw DegenerateSupport("fewer than 2 categories retained after pooling");
  }

  ChiSquareResult result;
  for (const auto& c : cats) {
    const double ea = na * c.pooled() / total;
    const double eb = nb * c.pooled() / total;
    result.statistic += (c.ca - ea) * (c.ca - ea) / ea;
    result.statistic += (c.cb - eb) * (c.cb - eb) / eb;
  }
  result.degrees_of_freedom = cats.size() - 1;
  result.p_value = chi_square_sf(result.statistic, result.degrees_of_freedom);
  return result;
}

ConsistencyReport compare(const PersonalityDistribution& a, const PersonalityDistribution& b) {
  ConsistencyReport r;
  auto [ma, sa] = mode_types(a);
  auto [mb, sb] = mode_types(b);
  r.mode_a = ma;
  r.mode_b = mb;
  r.second_mode_a = sa;
  r.second_mode_b = sb;
  r.mode_match = ma == mb;
  r.tv_distance = tv_distance(a, b);
  try {
    r.chi_square = chi_square_homogeneity(a, b);
  } catch (const DegenerateSupport&) {
    r.chi_square = std::nullopt;
  }
  return r;
}

void save_distribution(const std::string& path, const PersonalityDistribution& d,
                       const BootstrapPlan& plan,
                       const std::map<std::string, std::string>& provenance) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [type, count] : d.counts) counts[type.code()] = count;
  nlohmann::json j{{"counts", counts},
                   {"n_sets", d.n_sets},
                   {"plan", {{"n_sets", plan.n_sets}, {"set_size", plan.set_size}, {"seed", plan.seed}}}};
  for (const auto& [k, v] : provenance) j["provenance"][k] = v;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

PersonalityDistribution load_distribution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(0, std::string("distribution file: ") + e.what());
  }
  PersonalityDistribution d;
  try {
    d.n_sets = j.at("n_sets").get<uint64_t>();
    for (const auto& [code, count] : j.at("counts").items()) {
      d.counts[parse_type_label(code)] = count.get<uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(0, e.what());
  } catch (const InvalidLabel& e) {
    throw SchemaError(0, e.what());
  }
  uint64_t sum = 0;
  for (const auto& [type, count] : d.counts) sum += count;
  if (sum != d.n_sets) {
    throw SchemaError(0, "counts sum to " + std::to_string(sum) + " but n_sets is " +
                             std::to_string(d.n_sets));
  }
  return d;
}

void save_display_csv(const std::string& path, const DisplayDistribution& d) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  uint64_t total = d.others;
  for (const auto& [type, count] : d.retained) total += count;
  out << "type,count,fraction\n";
  // CSV ordering matches the code, largest first for pie readability.
  std::vector<std::pair<std::string, uint64_t>> rows;
  for (const auto& [type, count] : d.retained) rows.emplace_back(type.code(), count);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (d.others > 0) rows.emplace_back("Others", d.others);
  for (const auto& [name, count] : rows) {
    out << name << ',' << count << ',' << (static_cast<double>(count) / static_cast<double>(total))
        << '\n';
  }
}

std::string consistency_report_to_json(const ConsistencyReport& r) {
  nlohmann::json j{{"mode_a", r.mode_a.code()},
                   {"mode_b", r.mode_b.code()},
                   {"mode_match", r.mode_match},
                   {"tv_distance", r.tv_distance}};
  if (r.second_mode_a) j["second_mode_a"] = r.second_mode_a->code();
  if (r.second_mode_b) j["second_mode_b"] = r.second_mode_b->code();
  if (r.chi_square) {
    j["chi_square"] = {{"statistic", r.chi_square->statistic},
                       {"degrees_of_freedom", r.chi_square->degrees_of_freedom},
                       {"p_value", r.chi_square->p_value}};
  }
  return j.dump(2);
}

std::string consistency_report_to_text(const ConsistencyReport& r) {
  std::ostringstream out;
  auto with_second = [](MbtiType mode, const std::optional<MbtiType>& second) {
    return second ? mode.code() + " (" + second->code() + ")" : mode.code();
  };
  out << "mode A: " << with_second(r.mode_a, r.second_mode_a) << '\n';
  out << "mode B: " << with_second(r.mode_b, r.second_mode_b) << '\n';
  out << "mode match: " << (r.mode_match ? "yes" : "no") << '\n';
  out << "total variation distance: " << r.tv_distance << '\n';
  if (r.chi_square) {
    out << "chi-square: " << r.chi_square->statistic << " (df " << r.chi_square->degrees_of_freedom
        << ", p " << r.chi_square->p_value << ")\n";
  } else {
    out << "chi-square: omitted (degenerate support)\n";
  }
  return out.str();
}

}  // namespace mbti
