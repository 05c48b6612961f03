#pragma once
// Personality detectors: the pluggable prediction interface, a trainable
// TF-IDF + linear baseline, and a client for a remote fine-tuned model.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbti/corpus.hpp"
#include "mbti/types.hpp"

namespace mbti {

enum class DetectorMode { BinaryQuad, Direct16 };

std::string to_string(DetectorMode mode);
DetectorMode detector_mode_from_string(const std::string& s);

struct Prediction {
  MbtiType mbti;
  // Probability of the first pole (E, N, T, J) per dimension.
  std::array<double, kDimensions> per_dimension_scores{};
  std::optional<std::array<double, kTypeCount>> per_class_scores;
};

// Anything that maps a document set to a prediction. Implementations must
// be safely callable from multiple threads.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual Prediction predict(const DocumentSet& docs) const = 0;
};

struct EmptyTrainSet : std::runtime_error {
  EmptyTrainSet() : std::runtime_error("training set is empty") {}
};
struct EmptyVocabulary : std::runtime_error {
  EmptyVocabulary() : std::runtime_error("vocabulary is empty; lower min_df") {}
};
struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

// Lowercases and splits on non-alphanumeric runs; tokens shorter than 2
// bytes are dropped. Bytes >= 0x80 are treated as word characters so
// UTF-8 text stays intact.
std::vector<std::string> tokenize(const std::string& text);

struct FeatureVocabulary {
  std::map<std::string, uint32_t> term_to_index;  // dense 0..V-1
  std::vector<uint32_t> document_frequency;       // indexed by term index
  uint64_t train_document_count = 0;

  std::size_t size() const { return term_to_index.size(); }
};

// Terms with document frequency >= min_df, truncated to the max_features
// highest-df terms (ties broken lexicographically). One LabeledRecord
// counts as one document.
FeatureVocabulary build_vocabulary(const std::vector<LabeledRecord>& train, uint32_t min_df = 2,
                                   uint32_t max_features = 20000);

using SparseVector = std::vector<std::pair<uint32_t, double>>;  // sorted by index

// TF-IDF over the concatenated document set: tf = raw term count,
// idf = ln((1+N)/(1+df)) + 1, then L2 normalization.
SparseVector featurize(const FeatureVocabulary& vocab, const DocumentSet& docs);

struct TrainConfig {
  double learning_rate = 0.5;
  double l2_lambda = 1e-4;
  uint32_t epochs = 300;
  uint32_t min_df = 2;
  uint32_t max_features = 20000;
};

class LinearModel : public Detector {
 public:
  // One weight vector + bias per head: 4 heads for BinaryQuad (positive
  // class = first pole), 16 for Direct16.
  struct Head {
    std::vector<double> weights;
    double bias = 0.0;
  };

  DetectorMode mode = DetectorMode::BinaryQuad;
  FeatureVocabulary vocabulary;
  std::vector<Head> heads;
  TrainConfig training_config;
  std::vector<double> loss_history;  // mean loss per epoch, element 0 is pre-training

  Prediction predict(const DocumentSet& docs) const override;
  Prediction predict_features(const SparseVector& features) const;

  // provenance entries (config hash, seed, ...) are carried verbatim in
  // the model file and ignored on load.
  void save(const std::string& path,
            const std::map<std::string, std::string>& provenance = {}) const;
  static LinearModel load(const std::string& path);
};

LinearModel train_baseline(const std::vector<LabeledRecord>& train, DetectorMode mode,
                           const TrainConfig& config = {});

// Loss/gradient primitives, exposed for finite-difference checks.
// Binary logistic loss over a dataset of (sparse x, y in {0,1});
// gradient is with respect to (weights..., bias).
double logistic_loss(const std::vector<double>& weights, double bias,
                     const std::vector<SparseVector>& xs, const std::vector<uint8_t>& ys,
                     double l2_lambda);
void logistic_gradient(const std::vector<double>& weights, double bias,
                       const std::vector<SparseVector>& xs, const std::vector<uint8_t>& ys,
                       double l2_lambda, std::vector<double>& grad_w, double& grad_b);

// Multinomial softmax cross-entropy over K classes; weights laid out as
// K heads of (dim weights + bias is separate).
double softmax_loss(const std::vector<std::vector<double>>& weights,
                    const std::vector<double>& biases, const std::vector<SparseVector>& xs,
                    const std::vector<uint8_t>& ys, double l2_lambda);
void softmax_gradient(const std::vector<std::vector<double>>& weights,
                      const std::vector<double>& biases, const std::vector<SparseVector>& xs,
                      const std::vector<uint8_t>& ys, double l2_lambda,
                      std::vector<std::vector<double>>& grad_w, std::vector<double>& grad_b);

// --- Remote detector -----------------------------------------------------

struct RemoteTimeout : std::runtime_error {
  explicit RemoteTimeout(const std::string& what) : std::runtime_error(what) {}
};
struct TransportError : std::runtime_error {
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};
struct MalformedResponse : std::runtime_error {
  explicit MalformedResponse(const std::string& what) : std::runtime_error(what) {}
};

struct RemoteDetectorConfig {
  std::string base_url;          // e.g. http://host:port
  std::string path = "/predict";
  int timeout_seconds = 30;
  int max_in_flight = 4;
};

// Client for the wire protocol: POST {"documents": [...]} (1-50 entries),
// response {"type": code, "scores": [pE,pN,pT,pJ], "class_scores"?: [16]}.
class RemoteDetector : public Detector {
 public:
  explicit RemoteDetector(RemoteDetectorConfig config);
  ~RemoteDetector() override;

  Prediction predict(const DocumentSet& docs) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses and validates a remote response body; exposed for tests.
Prediction parse_remote_response(const std::string& body);

}  // namespace mbti
