#include "mbti/detector.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace mbti {

std::string to_string(DetectorMode mode) {
  return mode == DetectorMode::BinaryQuad ? "binary_quad" : "direct_16";
}

DetectorMode detector_mode_from_string(const std::string& s) {
  if (s == "binary_quad") return DetectorMode::BinaryQuad;
  if (s == "direct_16") return DetectorMode::Direct16;
  throw std::runtime_error("unknown detector mode '" + s + "'");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

FeatureVocabulary build_vocabulary(const std::vector<LabeledRecord>& train, uint32_t min_df,
                                   uint32_t max_features) {
  if (train.empty()) throw EmptyTrainSet();

  std::unordered_map<std::string, uint32_t> df;
  std::vector<std::string> seen;
  for (const auto& rec : train) {
    seen.clear();
    for (const auto& doc : rec.docs.documents) {
      for (auto& tok : tokenize(doc)) seen.push_back(std::move(tok));
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (const auto& tok : seen) ++df[tok];
  }

  std::vector<std::pair<std::string, uint32_t>> kept;
  kept.reserve(df.size());
  for (auto& [term, count] : df) {
    if (count >= min_df) kept.emplace_back(term, count);
  }
  // Highest df first, ties lexicographic.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > max_features) kept.resize(max_features);
  // Dense indices in lexicographic term order for stable serialization.
  std::sort(kept.begin(), kept.end());

  FeatureVocabulary vocab;
  vocab.train_document_count = train.size();
  vocab.document_frequency.reserve(kept.size());
  for (uint32_t i = 0; i < kept.size(); ++i) {
    vocab.term_to_index.emplace(kept[i].first, i);
    vocab.document_frequency.push_back(kept[i].second);
  }
  return vocab;
}

SparseVector featurize(const FeatureVocabulary& vocab, const DocumentSet& docs) {
  std::unordered_map<uint32_t, double> counts;
  for (const auto& doc : docs.documents) {
    for (const auto& tok : tokenize(doc)) {
      auto it = vocab.term_to_index.find(tok);
      if (it != vocab.term_to_index.end()) counts[it->second] += 1.0;
    }
  }

  const double n = static_cast<double>(vocab.train_document_count);
  SparseVector vec;
  vec.reserve(counts.size());
  double norm_sq = 0.0;
  for (const auto& [idx, tf] : counts) {
    const double idf = std::log((1.0 + n) / (1.0 + vocab.document_frequency[idx])) + 1.0;
    const double w = tf * idf;
    vec.emplace_back(idx, w);
    norm_sq += w * w;
  }
  std::sort(vec.begin(), vec.end());
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [idx, w] : vec) w *= inv;
  }
  return vec;
}

namespace {

double dot(const std::vector<double>& w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += w[i] * v;
  return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// -ln sigmoid(z) computed without overflow.
double log1p_exp_neg(double z) {
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

}  // namespace

double logistic_loss(const std::vector<double>& weights, double bias,
                     const std::vector<SparseVector>& xs, const std::vector<uint8_t>& ys,
                     double l2_lambda) {
  const double m = static_cast<double>(xs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = dot(weights, xs[i]) + bias;
    // -[y ln p + (1-y) ln(1-p)]
    loss += ys[i] ? log1p_exp_neg(z) : log1p_exp_neg(-z);
  }
  loss /= m;
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2_lambda * reg;
}

void logistic_gradient(const std::vector<double>& weights, double bias,
                       const std::vector<SparseVector>& xs, const std::vector<uint8_t>& ys,
                       double l2_lambda, std::vector<double>& grad_w, double& grad_b) {
  const double m = static_cast<double>(xs.size());
  grad_w.assign(weights.size(), 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = sigmoid(dot(weights, xs[i]) + bias);
    const double err = (p - static_cast<double>(ys[i])) / m;
    for (const auto& [idx, v] : xs[i]) grad_w[idx] += err * v;
    grad_b += err;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) grad_w[j] += l2_lambda * weights[j];
}

namespace {

std::vector<double> softmax_probs(const std::vector<std::vector<double>>& weights,
                                  const std::vector<double>& biases, const SparseVector& x) {
  const std::size_t k = weights.size();
  std::vector<double> z(k);
  for (std::size_t c = 0; c < k; ++c) z[c] = dot(weights[c], x) + biases[c];
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

}  // namespace

double softmax_loss(const std::vector<std::vector<double>>& weights,
                    const std::vector<double>& biases, const std::vector<SparseVector>& xs,
                    const std::vector<uint8_t>& ys, double l2_lambda) {
  const double m = static_cast<double>(xs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = softmax_probs(weights, biases, xs[i]);
    loss -= std::log(std::max(p[ys[i]], 1e-300));
  }
  loss /= m;
  double reg = 0.0;
  for (const auto& w : weights)
    for (double v : w) reg += v * v;
  return loss + 0.5 * l2_lambda * reg;
}

void softmax_gradient(const std::vector<std::vector<double>>& weights,
                      const std::vector<double>& biases, const std::vector<SparseVector>& xs,
                      const std::vector<uint8_t>& ys, double l2_lambda,
                      std::vector<std::vector<double>>& grad_w, std::vector<double>& grad_b) {
  const std::size_t k = weights.size();
  const double m = static_cast<double>(xs.size());
  grad_w.assign(k, std::vector<double>(weights[0].size(), 0.0));
  grad_b.assign(k, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = softmax_probs(weights, biases, xs[i]);
    for (std::size_t c = 0; c < k; ++c) {
      const double err = (p[c] - (ys[i] == c ? 1.0 : 0.0)) / m;
      for (const auto& [idx, v] : xs[i]) grad_w[c][idx] += err * v;
      grad_b[c] += err;
    }
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < weights[c].size(); ++j) grad_w[c][j] += l2_lambda * weights[c][j];
}

LinearModel train_baseline(const std::vector<LabeledRecord>& train, DetectorMode mode,
                           const TrainConfig& config) {
  if (train.empty()) throw EmptyTrainSet();

  LinearModel model;
  model.mode = mode;
  model.training_config = config;
  model.vocabulary = build_vocabulary(train, config.min_df, config.max_features);
  if (model.vocabulary.size() == 0) throw EmptyVocabulary();

  const std::size_t v = model.vocabulary.size();
  std::vector<SparseVector> xs;
  xs.reserve(train.size());
  for (const auto& rec : train) xs.push_back(featurize(model.vocabulary, rec.docs));

  if (mode == DetectorMode::BinaryQuad) {
    model.heads.assign(kDimensions, LinearModel::Head{std::vector<double>(v, 0.0), 0.0});
    std::array<std::vector<uint8_t>, kDimensions> labels;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      labels[d].reserve(train.size());
      for (const auto& rec : train) {
        labels[d].push_back(rec.label.traits().pole[d] == 0 ? 1 : 0);  // first pole = positive
      }
    }

    std::vector<double> grad_w;
    double grad_b = 0.0;
    for (uint32_t epoch = 0; epoch <= config.epochs; ++epoch) {
      double mean_loss = 0.0;
      for (std::size_t d = 0; d < kDimensions; ++d) {
        mean_loss += logistic_loss(model.heads[d].weights, model.heads[d].bias, xs, labels[d],
                                   config.l2_lambda);
      }
      mean_loss /= kDimensions;
      if (!std::isfinite(mean_loss)) {
        throw NonFiniteLoss("loss diverged at epoch " + std::to_string(epoch));
      }
      model.loss_history.push_back(mean_loss);
      if (epoch == config.epochs) break;
      for (std::size_t d = 0; d < kDimensions; ++d) {
        logistic_gradient(model.heads[d].weights, model.heads[d].bias, xs, labels[d],
                          config.l2_lambda, grad_w, grad_b);
        for (std::size_t j = 0; j < v; ++j) {
          model.heads[d].weights[j] -= config.learning_rate * grad_w[j];
        }
        model.heads[d].bias -= config.learning_rate * grad_b;
      }
    }
  } else {
    model.heads.assign(kTypeCount, LinearModel::Head{std::vector<double>(v, 0.0), 0.0});
    std::vector<uint8_t> labels;
    labels.reserve(train.size());
    for (const auto& rec : train) labels.push_back(rec.label.index());

    std::vector<std::vector<double>> w(kTypeCount, std::vector<double>(v, 0.0));
    std::vector<double> b(kTypeCount, 0.0);
    std::vector<std::vector<double>> grad_w;
    std::vector<double> grad_b;
    for (uint32_t epoch = 0; epoch <= config.epochs; ++epoch) {
      const double loss = softmax_loss(w, b, xs, labels, config.l2_lambda);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("loss diverged at epoch " + std::to_string(epoch));
      }
      model.loss_history.push_back(loss);
      if (epoch == config.epochs) break;
      softmax_gradient(w, b, xs, labels, config.l2_lambda, grad_w, grad_b);
      for (std::size_t c = 0; c < kTypeCount; ++c) {
        for (std::size_t j = 0; j < v; ++j) w[c][j] -= config.learning_rate * grad_w[c][j];
        b[c] -= config.learning_rate * grad_b[c];
      }
    }
    for (std::size_t c = 0; c < kTypeCount; ++c) {
      model.heads[c].weights = std::move(w[c]);
      model.heads[c].bias = b[c];
    }
  }
  return model;
}

Prediction LinearModel::predict_features(const SparseVector& features) const {
  Prediction pred;
  if (mode == DetectorMode::BinaryQuad) {
    TraitVector traits;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      const double score = sigmoid(dot(heads[d].weights, features) + heads[d].bias);
      pred.per_dimension_scores[d] = score;
      traits.pole[d] = score >= 0.5 ? 0 : 1;  // tie goes to the first pole
    }
    pred.mbti = type_from_traits(traits);
  } else {
    std::vector<std::vector<double>> w;
    w.reserve(kTypeCount);
    std::vector<double> b;
    b.reserve(kTypeCount);
    for (const auto& h : heads) {
      w.push_back(h.weights);
      b.push_back(h.bias);
    }
    const auto probs = softmax_probs(w, b, features);
    std::array<double, kTypeCount> class_scores{};
    std::size_t best = 0;
    for (std::size_t c = 0; c < kTypeCount; ++c) {
      class_scores[c] = probs[c];
      if (probs[c] > probs[best]) best = c;
    }
    pred.per_class_scores = class_scores;
    pred.mbti = MbtiType(static_cast<uint8_t>(best));
    for (std::size_t d = 0; d < kDimensions; ++d) {
      double first_pole_mass = 0.0;
      for (std::size_t c = 0; c < kTypeCount; ++c) {
        if (((c >> d) & 1u) == 0) first_pole_mass += probs[c];
      }
      pred.per_dimension_scores[d] = first_pole_mass;
    }
  }
  return pred;
}

Prediction LinearModel::predict(const DocumentSet& docs) const {
  return predict_features(featurize(vocabulary, docs));
}

void LinearModel::save(const std::string& path,
                       const std::map<std::string, std::string>& provenance) const {
  nlohmann::json j;
  j["format_version"] = 1;
  for (const auto& [k, v] : provenance) j["provenance"][k] = v;
  j["mode"] = to_string(mode);
  std::vector<std::string> terms(vocabulary.size());
  for (const auto& [term, idx] : vocabulary.term_to_index) terms[idx] = term;
  j["vocabulary"] = {{"terms", terms},
                     {"document_frequency", vocabulary.document_frequency},
                     {"train_document_count", vocabulary.train_document_count}};
  j["training_config"] = {{"learning_rate", training_config.learning_rate},
                          {"l2_lambda", training_config.l2_lambda},
                          {"epochs", training_config.epochs},
                          {"min_df", training_config.min_df},
                          {"max_features", training_config.max_features}};
  auto& heads_json = j["heads"] = nlohmann::json::array();
  for (const auto& h : heads) {
    heads_json.push_back({{"weights", h.weights}, {"bias", h.bias}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump();
}

LinearModel LinearModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("model file: ") + e.what());
  }

  LinearModel model;
  model.mode = detector_mode_from_string(j.at("mode").get<std::string>());
  const auto& vj = j.at("vocabulary");
  const auto terms = vj.at("terms").get<std::vector<std::string>>();
  model.vocabulary.document_frequency = vj.at("document_frequency").get<std::vector<uint32_t>>();
  model.vocabulary.train_document_count = vj.at("train_document_count").get<uint64_t>();
  for (uint32_t i = 0; i < terms.size(); ++i) model.vocabulary.term_to_index.emplace(terms[i], i);
  const auto& tc = j.at("training_config");
  model.training_config.learning_rate = tc.at("learning_rate").get<double>();
  model.training_config.l2_lambda = tc.at("l2_lambda").get<double>();
  model.training_config.epochs = tc.at("epochs").get<uint32_t>();
  model.training_config.min_df = tc.at("min_df").get<uint32_t>();
  model.training_config.max_features = tc.at("max_features").get<uint32_t>();
  for (const auto& hj : j.at("heads")) {
    LinearModel::Head h;
    h.weights = hj.at("weights").get<std::vector<double>>();
    h.bias = hj.at("bias").get<double>();
    model.heads.push_back(std::move(h));
  }
  const std::size_t expected = model.mode == DetectorMode::BinaryQuad ? kDimensions : kTypeCount;
  if (model.heads.size() != expected) {
    throw ParseError(0, "model file: wrong head count for mode " + to_string(model.mode));
  }
  return model;
}

// --- Remote detector -----------------------------------------------------

Prediction parse_remote_response(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedResponse("response is not a JSON object");

  Prediction pred;
  std::string code;
  try {
    code = j.at("type").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(e.what());
  }
  const auto type = try_parse_type_label(code);
  if (!type) throw MalformedResponse("invalid type code '" + code + "'");
  pred.mbti = *type;

  std::vector<double> scores;
  try {
    scores = j.at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(e.what());
  }
  if (scores.size() != kDimensions) throw MalformedResponse("expected 4 scores");
  for (std::size_t d = 0; d < kDimensions; ++d) {
    if (!(scores[d] >= 0.0 && scores[d] <= 1.0)) {
      throw MalformedResponse("score out of [0,1]");
    }
    pred.per_dimension_scores[d] = scores[d];
  }

  if (j.contains("class_scores")) {
    const auto cs = j.at("class_scores").get<std::vector<double>>();
    if (cs.size() != kTypeCount) throw MalformedResponse("expected 16 class scores");
    std::array<double, kTypeCount> arr{};
    std::size_t best = 0;
    for (std::size_t c = 0; c < kTypeCount; ++c) {
      if (!(cs[c] >= 0.0 && cs[c] <= 1.0)) throw MalformedResponse("class score out of [0,1]");
      arr[c] = cs[c];
      if (cs[c] > cs[best]) best = c;
    }
    pred.per_class_scores = arr;
    if (best != pred.mbti.index()) {
      throw MalformedResponse("type disagrees with class_scores argmax");
    }
  } else {
    TraitVector t;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      t.pole[d] = pred.per_dimension_scores[d] >= 0.5 ? 0 : 1;
    }
    if (type_from_traits(t) != pred.mbti) {
      throw MalformedResponse("type disagrees with thresholded scores");
    }
  }
  return pred;
}

struct RemoteDetector::Impl {
  RemoteDetectorConfig config;
  mutable httplib::Client client;
  // Bounds concurrent in-flight requests.
  mutable std::mutex mu;
  mutable std::condition_variable cv;
  mutable int in_flight = 0;

  explicit Impl(RemoteDetectorConfig cfg) : config(std::move(cfg)), client(config.base_url) {
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);
  }
};

RemoteDetector::RemoteDetector(RemoteDetectorConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteDetector::~RemoteDetector() = default;

Prediction RemoteDetector::predict(const DocumentSet& docs) const {
  if (docs.documents.empty() || docs.documents.size() > kMaxDocumentsPerSet) {
    throw std::invalid_argument("document set must hold 1-50 documents");
  }

  {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait(lock, [&] { return impl_->in_flight < impl_->config.max_in_flight; });
    ++impl_->in_flight;
  }
  struct Release {
    const Impl* impl;
    ~Release() {
      std::lock_guard lock(impl->mu);
      --impl->in_flight;
      impl->cv.notify_one();
    }
  } release{impl_.get()};

  const nlohmann::json body{{"documents", docs.documents}};
  auto res = impl_->client.Post(impl_->config.path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw RemoteTimeout("no response within " + std::to_string(impl_->config.timeout_seconds) +
                          "s");
    }
    throw TransportError(httplib::to_string(err));
  }
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status));
  }
  return parse_remote_response(res->body);
}

}  // namespace mbti
