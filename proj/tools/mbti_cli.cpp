// Operator entry point: ingest, split, train, eval-detector, generate,
// assess, compare, report.
//
// Exit statuses: 0 success, 2 input/config error, 3 partial generation,
// 4 remote-detector failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mbti/bootstrap.hpp"
#include "mbti/corpus.hpp"
#include "mbti/detector.hpp"
#include "mbti/genpipe.hpp"
#include "mbti/hash.hpp"
#include "mbti/metrics.hpp"
#include "mbti/types.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitPartialGeneration = 3;
constexpr int kExitRemoteFailure = 4;

// Hash of the resolved option values, embedded in every artifact so runs
// can be traced back to their configuration.
std::string config_hash(const std::map<std::string, std::string>& options) {
  std::ostringstream canon;
  for (const auto& [k, v] : options) canon << k << '=' << v << '\n';
  return mbti::hash_hex(canon.str());
}

std::map<std::string, std::string> provenance_for(const std::map<std::string, std::string>& options,
                                                  uint64_t seed) {
  return {{"config_hash", config_hash(options)}, {"seed", std::to_string(seed)}};
}

// Constant-output detector used for plumbing tests and dry runs.
class StubDetector : public mbti::Detector {
 public:
  explicit StubDetector(mbti::MbtiType type) : type_(type) {}
  mbti::Prediction predict(const mbti::DocumentSet&) const override {
    mbti::Prediction p;
    p.mbti = type_;
    const auto traits = type_.traits();
    for (std::size_t d = 0; d < mbti::kDimensions; ++d) {
      p.per_dimension_scores[d] = traits.pole[d] == 0 ? 1.0 : 0.0;
    }
    return p;
  }

 private:
  mbti::MbtiType type_;
};

int cmd_ingest(const std::string& corpus_path) {
  const auto records = mbti::load_corpus(corpus_path);
  std::map<std::string, std::size_t> by_label;
  for (const auto& rec : records) ++by_label[rec.label.code()];
  nlohmann::json j{{"records", records.size()}, {"by_label", by_label}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_split(const std::string& corpus_path, uint64_t seed, const std::string& out_path,
              const std::map<std::string, std::string>& options) {
  const auto records = mbti::load_corpus(corpus_path);
  const auto split = mbti::split_corpus(records, seed);
  auto ids = [](const std::vector<mbti::LabeledRecord>& recs) {
    std::vector<std::string> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(r.source_id);
    return out;
  };
  nlohmann::json j{{"seed", seed},
                   {"sizes", {split.train.size(), split.eval.size(), split.test.size()}},
                   {"train", ids(split.train)},
                   {"eval", ids(split.eval)},
                   {"test", ids(split.test)}};
  for (const auto& [k, v] : provenance_for(options, seed)) j["provenance"][k] = v;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw mbti::IoError("cannot write " + out_path);
    out << j.dump(2) << '\n';
  }
  std::cout << "split sizes: " << split.train.size() << " / " << split.eval.size() << " / "
            << split.test.size() << '\n';
  return kExitOk;
}

int cmd_train(const std::string& corpus_path, const std::string& mode_str, uint64_t seed,
              const std::string& model_out, const mbti::TrainConfig& tc,
              const std::map<std::string, std::string>& options) {
  const auto records = mbti::load_corpus(corpus_path);
  const auto split = mbti::split_corpus(records, seed);
  const auto mode = mbti::detector_mode_from_string(mode_str);
  const auto model = mbti::train_baseline(split.train, mode, tc);
  if (!model_out.empty()) model.save(model_out, provenance_for(options, seed));

  std::vector<mbti::MbtiType> labels, preds;
  for (const auto& rec : split.eval) {
    labels.push_back(rec.label);
    preds.push_back(model.predict(rec.docs).mbti);
  }
  const auto report = mbti::sixteen_class_report(labels, preds);
  std::cout << "eval split (" << labels.size() << " records):\n"
            << mbti::report_to_table(report);
  return kExitOk;
}

int cmd_eval_detector(const std::string& corpus_path, const std::string& model_path, uint64_t seed,
                      const std::string& which_split, const std::string& report_out) {
  const auto records = mbti::load_corpus(corpus_path);
  const auto split = mbti::split_corpus(records, seed);
  const auto model = mbti::LinearModel::load(model_path);
  const auto& subset = which_split == "eval" ? split.eval : split.test;

  std::vector<mbti::MbtiType> labels, preds;
  for (const auto& rec : subset) {
    labels.push_back(rec.label);
    preds.push_back(model.predict(rec.docs).mbti);
  }
  const auto report = mbti::sixteen_class_report(labels, preds);
  std::cout << which_split << " split (" << labels.size() << " records):\n"
            << mbti::report_to_table(report);
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    if (!out) throw mbti::IoError("cannot write " + report_out);
    out << mbti::report_to_json(report) << '\n';
  }
  return kExitOk;
}

int cmd_generate(const std::string& events_path, const std::string& tweets_path,
                 const std::string& provider_name, const std::string& pool_out,
                 const std::string& failures_out, uint32_t parallelism,
                 const mbti::GenerationConfig& gc, const mbti::OpenAiProviderConfig& oc,
                 uint64_t seed, const std::map<std::string, std::string>& options) {
  const auto tasks = mbti::load_content_sources(events_path, tweets_path);
  std::shared_ptr<mbti::Provider> provider;
  if (provider_name == "mock") {
    provider = mbti::make_mock_provider();
  } else if (provider_name == "openai") {
    provider = mbti::make_openai_provider(oc);
  } else {
    throw mbti::ConfigError("unknown provider '" + provider_name + "'");
  }

  mbti::RetryPolicy retry;
  retry.jitter_seed = seed;
  const auto result = mbti::run_generation(tasks, *provider, gc, parallelism, retry);
  mbti::save_text_pool(pool_out, result.outputs);
  {
    std::ofstream meta(pool_out + ".meta.json");
    nlohmann::json j{{"tasks", tasks.size()},
                     {"outputs", result.outputs.size()},
                     {"failures", result.failures.size()}};
    for (const auto& [k, v] : provenance_for(options, seed)) j["provenance"][k] = v;
    meta << j.dump(2) << '\n';
  }
  if (!failures_out.empty()) {
    std::ofstream out(failures_out);
    for (const auto& f : result.failures) {
      out << nlohmann::json{{"task_id", f.task_id}, {"error", f.error}, {"attempts", f.attempts}}
                 .dump()
          << '\n';
    }
  }
  std::cout << "generated " << result.outputs.size() << " / " << tasks.size() << " texts\n";
  return result.failures.empty() ? kExitOk : kExitPartialGeneration;
}

int cmd_assess(const std::string& pool_path, const std::string& model_path,
               const std::string& remote_url, const std::string& stub_type,
               const std::string& dist_out, const std::string& csv_out, uint32_t n_sets,
               uint32_t set_size, uint64_t seed, uint32_t parallelism, uint64_t threshold,
               const std::map<std::string, std::string>& options) {
  const auto pool = mbti::load_text_pool(pool_path);
  std::unique_ptr<mbti::Detector> detector;
  if (!stub_type.empty()) {
    detector = std::make_unique<StubDetector>(mbti::parse_type_label(stub_type));
  } else if (!remote_url.empty()) {
    mbti::RemoteDetectorConfig rc;
    rc.base_url = remote_url;
    detector = std::make_unique<mbti::RemoteDetector>(rc);
  } else if (!model_path.empty()) {
    detector = std::make_unique<mbti::LinearModel>(mbti::LinearModel::load(model_path));
  } else {
    throw mbti::ConfigError("one of --model, --remote-url, --stub-type is required");
  }

  const mbti::BootstrapPlan plan(n_sets, set_size, seed);
  const auto dist = mbti::assess(pool, *detector, plan, parallelism);
  mbti::save_distribution(dist_out, dist, plan, provenance_for(options, seed));
  if (!csv_out.empty()) mbti::save_display_csv(csv_out, mbti::merge_others(dist, threshold));

  const auto [mode, second] = mbti::mode_types(dist);
  std::cout << "mode type: " << mode.code();
  if (second) std::cout << " (" << second->code() << ")";
  std::cout << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& report_out) {
  const auto a = mbti::load_distribution(a_path);
  const auto b = mbti::load_distribution(b_path);
  const auto report = mbti::compare(a, b);
  std::cout << mbti::consistency_report_to_text(report);
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    if (!out) throw mbti::IoError("cannot write " + report_out);
    out << mbti::consistency_report_to_json(report) << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::string& dist_path, const std::string& csv_out, uint64_t threshold) {
  const auto dist = mbti::load_distribution(dist_path);
  const auto display = mbti::merge_others(dist, threshold);
  if (!csv_out.empty()) mbti::save_display_csv(csv_out, display);
  for (const auto& [type, count] : display.retained) {
    std::cout << type.code() << ": " << count << '\n';
  }
  if (display.others > 0) std::cout << "Others: " << display.others << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"External personality evaluation pipeline"};
  app.require_subcommand(1);
  app.set_config("--config")->configurable(false);

  std::string corpus_path, model_path, model_out, mode_str = "binary_quad";
  std::string events_path, tweets_path, provider_name = "mock";
  std::string pool_path, pool_out, failures_out, dist_out, csv_out, report_out;
  std::string dist_a, dist_b, remote_url, stub_type, which_split = "test", split_out;
  uint64_t seed = 0, threshold = 3;
  uint32_t parallelism = 4, n_sets = 100, set_size = 50;
  mbti::TrainConfig tc;
  mbti::GenerationConfig gc;
  mbti::OpenAiProviderConfig oc;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus file and print a summary");
  ingest->add_option("--corpus", corpus_path, "Kaggle-format CSV")->required();

  auto* split = app.add_subcommand("split", "Write the deterministic 81:9:10 split");
  split->add_option("--corpus", corpus_path)->required();
  split->add_option("--seed", seed)->required();
  split->add_option("--out", split_out, "Split manifest JSON");

  auto* train = app.add_subcommand("train", "Train the baseline detector");
  train->add_option("--corpus", corpus_path)->required();
  train->add_option("--mode", mode_str, "binary_quad | direct_16");
  train->add_option("--seed", seed)->required();
  train->add_option("--model-out", model_out)->required();
  train->add_option("--learning-rate", tc.learning_rate);
  train->add_option("--l2", tc.l2_lambda);
  train->add_option("--epochs", tc.epochs);
  train->add_option("--min-df", tc.min_df);
  train->add_option("--max-features", tc.max_features);

  auto* evald = app.add_subcommand("eval-detector", "Evaluate a saved model on a held-out split");
  evald->add_option("--corpus", corpus_path)->required();
  evald->add_option("--model", model_path)->required();
  evald->add_option("--seed", seed)->required();
  evald->add_option("--split", which_split, "eval | test");
  evald->add_option("--report-out", report_out);

  auto* generate = app.add_subcommand("generate", "Run the prompting pipeline");
  generate->add_option("--events", events_path, "Line-delimited events for Post tasks");
  generate->add_option("--tweets", tweets_path, "Line-delimited tweets for Comment tasks");
  generate->add_option("--provider", provider_name, "mock | openai");
  generate->add_option("--out", pool_out)->required();
  generate->add_option("--failures-out", failures_out);
  generate->add_option("--parallelism", parallelism);
  generate->add_option("--seed", seed);
  generate->add_option("--temperature", gc.temperature);
  generate->add_option("--top-p", gc.top_p);
  generate->add_option("--max-tokens", gc.max_tokens);
  generate->add_option("--base-url", oc.base_url);
  generate->add_option("--model", oc.model);

  auto* assess = app.add_subcommand("assess", "Bootstrap-assess a generation pool");
  assess->add_option("--pool", pool_path)->required();
  assess->add_option("--model", model_path);
  assess->add_option("--remote-url", remote_url);
  assess->add_option("--stub-type", stub_type, "Constant detector output, e.g. INFJ");
  assess->add_option("--out", dist_out)->required();
  assess->add_option("--csv-out", csv_out);
  assess->add_option("--n-sets", n_sets);
  assess->add_option("--set-size", set_size);
  assess->add_option("--seed", seed)->required();
  assess->add_option("--parallelism", parallelism);
  assess->add_option("--others-threshold", threshold);

  auto* compare = app.add_subcommand("compare", "Compare two personality distributions");
  compare->add_option("--a", dist_a)->required();
  compare->add_option("--b", dist_b)->required();
  compare->add_option("--out", report_out);

  auto* report = app.add_subcommand("report", "Display-merge a distribution and export CSV");
  report->add_option("--dist", dist_a)->required();
  report->add_option("--csv-out", csv_out);
  report->add_option("--others-threshold", threshold);

  CLI11_PARSE(app, argc, argv);

  std::map<std::string, std::string> options;
  for (const auto* sub : app.get_subcommands()) {
    for (const auto* opt : sub->get_options()) {
      if (!opt->results().empty()) options[opt->get_name()] = opt->results().front();
    }
  }

  try {
    if (*ingest) return cmd_ingest(corpus_path);
    if (*split) return cmd_split(corpus_path, seed, split_out, options);
    if (*train) return cmd_train(corpus_path, mode_str, seed, model_out, tc, options);
    if (*evald) return cmd_eval_detector(corpus_path, model_path, seed, which_split, report_out);
    if (*generate) {
      return cmd_generate(events_path, tweets_path, provider_name, pool_out, failures_out,
                          parallelism, gc, oc, seed, options);
    }
    if (*assess) {
      return cmd_assess(pool_path, model_path, remote_url, stub_type, dist_out, csv_out, n_sets,
                        set_size, seed, parallelism, threshold, options);
    }
    if (*compare) return cmd_compare(dist_a, dist_b, report_out);
    if (*report) return cmd_report(dist_a, csv_out, threshold);
  } catch (const mbti::RemoteTimeout& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRemoteFailure;
  } catch (const mbti::TransportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRemoteFailure;
  } catch (const mbti::MalformedResponse& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRemoteFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
