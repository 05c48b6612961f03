#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <thread>

#include <httplib.h>

#include "mbti/detector.hpp"

using namespace mbti;

namespace {

// One marker token per type; any detector trained on this corpus can
// separate the classes perfectly.
std::string marker_for(MbtiType type) {
  std::string code = type.code();
  for (char& c : code) c = static_cast<char>(std::tolower(c));
  return "marker" + code;
}

std::vector<LabeledRecord> separable_corpus(int records_per_type = 3) {
  std::vector<LabeledRecord> recs;
  for (const auto type : all_types()) {
    for (int i = 0; i < records_per_type; ++i) {
      LabeledRecord rec;
      rec.label = type;
      rec.docs.documents = {"filler words here", marker_for(type) + " appears " + marker_for(type)};
      rec.source_id = type.code() + "-" + std::to_string(i);
      recs.push_back(std::move(rec));
    }
  }
  return recs;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits on non-alphanumeric runs, drops 1-char tokens") {
  CHECK(tokenize("Cat, DOG!! bird") == std::vector<std::string>{"cat", "dog", "bird"});
  CHECK(tokenize("a I x") == std::vector<std::string>{});
  CHECK(tokenize("http://foo.bar/baz?q=1") ==
        std::vector<std::string>{"http", "foo", "bar", "baz"});
}

TEST_CASE("build_vocabulary applies min_df and max_features") {
  std::vector<LabeledRecord> recs(2);
  recs[0].label = parse_type_label("INTJ");
  recs[0].docs.documents = {"aa bb bb"};
  recs[1].label = parse_type_label("ENTP");
  recs[1].docs.documents = {"aa cc"};

  SUBCASE("min_df 1 keeps everything") {
    const auto vocab = build_vocabulary(recs, 1, 100);
    CHECK(vocab.size() == 3);
    CHECK(vocab.term_to_index.count("aa") == 1);
    CHECK(vocab.document_frequency[vocab.term_to_index.at("aa")] == 2);
    CHECK(vocab.document_frequency[vocab.term_to_index.at("bb")] == 1);
  }
  SUBCASE("min_df 2 drops rare terms") {
    const auto vocab = build_vocabulary(recs, 2, 100);
    CHECK(vocab.size() == 1);
    CHECK(vocab.term_to_index.count("aa") == 1);
  }
  SUBCASE("max_features keeps highest-df terms") {
    const auto vocab = build_vocabulary(recs, 1, 1);
    CHECK(vocab.size() == 1);
    CHECK(vocab.term_to_index.count("aa") == 1);
  }
  SUBCASE("empty train set is rejected") {
    CHECK_THROWS_AS(build_vocabulary({}, 1, 10), EmptyTrainSet);
  }
}

TEST_CASE("featurize matches the hand-computed tf-idf oracle") {
  // Training corpus of 2 documents: ["cat cat dog"], ["dog bird"].
  FeatureVocabulary vocab;
  vocab.term_to_index = {{"bird", 0}, {"cat", 1}, {"dog", 2}};
  vocab.document_frequency = {1, 1, 2};
  vocab.train_document_count = 2;

  const auto vec = featurize(vocab, DocumentSet{{"cat dog"}});
  // idf = ln((1+N)/(1+df)) + 1: cat -> ln(3/2)+1, dog -> ln(3/3)+1 = 1.
  const double w_cat = std::log(3.0 / 2.0) + 1.0;
  const double w_dog = 1.0;
  const double norm = std::sqrt(w_cat * w_cat + w_dog * w_dog);

  REQUIRE(vec.size() == 2);
  CHECK(vec[0].first == 1);
  CHECK(vec[0].second == doctest::Approx(w_cat / norm).epsilon(1e-12));
  CHECK(vec[1].first == 2);
  CHECK(vec[1].second == doctest::Approx(w_dog / norm).epsilon(1e-12));

  SUBCASE("no vocabulary overlap gives the zero vector") {
    CHECK(featurize(vocab, DocumentSet{{"zebra yak"}}).empty());
  }
  SUBCASE("featurize is pure") {
    CHECK(featurize(vocab, DocumentSet{{"cat dog"}}) == vec);
  }
  SUBCASE("term frequency scales before normalization") {
    const auto v2 = featurize(vocab, DocumentSet{{"cat cat dog"}});
    const double n2 = std::sqrt(4.0 * w_cat * w_cat + w_dog * w_dog);
    CHECK(v2[0].second == doctest::Approx(2.0 * w_cat / n2).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(2024);
  auto unit = [&] { return static_cast<double>(rng() % 2000) / 1000.0 - 1.0; };

  const std::size_t dim = 10;
  const double h = 1e-6;
  const double lambda = 1e-3;

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SparseVector> xs;
    std::vector<uint8_t> ys_bin, ys_multi;
    for (int i = 0; i < 8; ++i) {
      SparseVector x;
      for (uint32_t j = 0; j < dim; ++j) {
        if (rng() % 2 == 0) x.emplace_back(j, unit());
      }
      xs.push_back(std::move(x));
      ys_bin.push_back(static_cast<uint8_t>(rng() % 2));
      ys_multi.push_back(static_cast<uint8_t>(rng() % 4));
    }

    // Logistic.
    std::vector<double> w(dim);
    for (auto& v : w) v = unit();
    double b = unit();
    std::vector<double> grad_w;
    double grad_b;
    logistic_gradient(w, b, xs, ys_bin, lambda, grad_w, grad_b);
    for (std::size_t j = 0; j < dim; ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (logistic_loss(wp, b, xs, ys_bin, lambda) -
                         logistic_loss(wm, b, xs, ys_bin, lambda)) /
                        (2 * h);
      CHECK(std::abs(grad_w[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    const double fd_b = (logistic_loss(w, b + h, xs, ys_bin, lambda) -
                         logistic_loss(w, b - h, xs, ys_bin, lambda)) /
                        (2 * h);
    CHECK(std::abs(grad_b - fd_b) <= 1e-4 * std::max(1.0, std::abs(fd_b)));

    // Softmax, 4 classes.
    std::vector<std::vector<double>> sw(4, std::vector<double>(dim));
    std::vector<double> sb(4);
    for (auto& row : sw)
      for (auto& v : row) v = unit();
    for (auto& v : sb) v = unit();
    std::vector<std::vector<double>> sgw;
    std::vector<double> sgb;
    softmax_gradient(sw, sb, xs, ys_multi, lambda, sgw, sgb);
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t j = 0; j < dim; ++j) {
        auto swp = sw, swm = sw;
        swp[c][j] += h;
        swm[c][j] -= h;
        const double fd = (softmax_loss(swp, sb, xs, ys_multi, lambda) -
                           softmax_loss(swm, sb, xs, ys_multi, lambda)) /
                          (2 * h);
        CHECK(std::abs(sgw[c][j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("training fits the separable synthetic corpus exactly") {
  const auto corpus = separable_corpus();
  TrainConfig tc;
  tc.min_df = 1;

  for (const auto mode : {DetectorMode::BinaryQuad, DetectorMode::Direct16}) {
    CAPTURE(to_string(mode));
    const auto model = train_baseline(corpus, mode, tc);
    for (const auto& rec : corpus) {
      CHECK(model.predict(rec.docs).mbti == rec.label);
    }
    REQUIRE(model.loss_history.size() >= 2);
    CHECK(model.loss_history.back() < model.loss_history.front());
  }
}

TEST_CASE("predict on the marker input recovers the marked type") {
  const auto model = train_baseline(separable_corpus(), DetectorMode::BinaryQuad,
                                    TrainConfig{.min_df = 1});
  const auto infp = parse_type_label("INFP");
  CHECK(model.predict(DocumentSet{{marker_for(infp) + " something"}}).mbti == infp);
}

TEST_CASE("zero-epoch model scores 0.5 everywhere and ties go to ENTJ") {
  TrainConfig tc;
  tc.epochs = 0;
  tc.min_df = 1;
  const auto model = train_baseline(separable_corpus(), DetectorMode::BinaryQuad, tc);
  for (const auto& h : model.heads) {
    CHECK(h.bias == 0.0);
    for (double w : h.weights) CHECK(w == 0.0);
  }
  const auto pred = model.predict(DocumentSet{{"anything at all"}});
  for (double s : pred.per_dimension_scores) CHECK(s == 0.5);
  CHECK(pred.mbti.code() == "ENTJ");
}

TEST_CASE("a dimension with constant labels predicts the constant pole") {
  // All labels introverted; the EI head must lean I everywhere.
  std::vector<LabeledRecord> recs;
  for (const char* code : {"INTJ", "INFP", "ISTJ", "ISFP"}) {
    LabeledRecord rec;
    rec.label = parse_type_label(code);
    rec.docs.documents = {std::string("text about ") + code};
    rec.source_id = code;
    recs.push_back(std::move(rec));
  }
  const auto model = train_baseline(recs, DetectorMode::BinaryQuad, TrainConfig{.min_df = 1});
  const auto pred = model.predict(DocumentSet{{"unseen words entirely"}});
  CHECK(pred.per_dimension_scores[0] < 0.5);  // P(E) < 0.5 everywhere
}

TEST_CASE("empty vocabulary is rejected at train time") {
  std::vector<LabeledRecord> recs(1);
  recs[0].label = parse_type_label("INTJ");
  recs[0].docs.documents = {"aa bb"};
  TrainConfig tc;
  tc.min_df = 2;  // nothing reaches df 2 with one record
  CHECK_THROWS_AS(train_baseline(recs, DetectorMode::BinaryQuad, tc), EmptyVocabulary);
}

TEST_CASE("a hopeless learning rate raises NonFiniteLoss") {
  TrainConfig tc;
  tc.min_df = 1;
  tc.learning_rate = 1e18;
  tc.epochs = 50;
  CHECK_THROWS_AS(train_baseline(separable_corpus(), DetectorMode::Direct16, tc), NonFiniteLoss);
}

TEST_CASE("training is bit-deterministic") {
  const auto corpus = separable_corpus();
  const auto a = train_baseline(corpus, DetectorMode::BinaryQuad, TrainConfig{.min_df = 1});
  const auto b = train_baseline(corpus, DetectorMode::BinaryQuad, TrainConfig{.min_df = 1});
  REQUIRE(a.heads.size() == b.heads.size());
  for (std::size_t i = 0; i < a.heads.size(); ++i) {
    CHECK(a.heads[i].bias == b.heads[i].bias);
    CHECK(a.heads[i].weights == b.heads[i].weights);
  }
}

TEST_CASE("Direct16 per-dimension scores marginalize the class scores") {
  const auto model = train_baseline(separable_corpus(), DetectorMode::Direct16,
                                    TrainConfig{.min_df = 1});
  const auto pred = model.predict(DocumentSet{{"markerintj words"}});
  REQUIRE(pred.per_class_scores.has_value());
  double sum = 0.0;
  for (double p : *pred.per_class_scores) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t d = 0; d < kDimensions; ++d) {
    double first_pole = 0.0;
    for (std::size_t c = 0; c < kTypeCount; ++c) {
      if (((c >> d) & 1u) == 0) first_pole += (*pred.per_class_scores)[c];
    }
    CHECK(pred.per_dimension_scores[d] == doctest::Approx(first_pole).epsilon(1e-12));
  }
}

TEST_CASE("model save/load round-trips predictions") {
  const auto model = train_baseline(separable_corpus(), DetectorMode::BinaryQuad,
                                    TrainConfig{.min_df = 1});
  const auto path = std::filesystem::temp_directory_path() / "mbti-model-roundtrip.json";
  model.save(path.string(), {{"seed", "7"}});
  const auto loaded = LinearModel::load(path.string());
  CHECK(loaded.mode == model.mode);
  CHECK(loaded.vocabulary.size() == model.vocabulary.size());
  const DocumentSet probe{{"markerisfj and more"}};
  const auto p1 = model.predict(probe);
  const auto p2 = loaded.predict(probe);
  CHECK(p1.mbti == p2.mbti);
  for (std::size_t d = 0; d < kDimensions; ++d) {
    CHECK(p1.per_dimension_scores[d] == p2.per_dimension_scores[d]);
  }
}

TEST_CASE("parse_remote_response validates type and score ranges") {
  const auto pred = parse_remote_response(R"({"type":"INFJ","scores":[0.2,0.9,0.3,0.8]})");
  CHECK(pred.mbti.code() == "INFJ");
  CHECK(pred.per_dimension_scores[1] == 0.9);

  CHECK_THROWS_AS(parse_remote_response(R"({"type":"XQZW","scores":[0.2,0.9,0.3,0.8]})"),
                  MalformedResponse);
  CHECK_THROWS_AS(parse_remote_response(R"({"type":"INFJ","scores":[0.2,0.9,0.3,1.8]})"),
                  MalformedResponse);
  CHECK_THROWS_AS(parse_remote_response(R"({"type":"INFJ","scores":[0.2,0.9]})"),
                  MalformedResponse);
  CHECK_THROWS_AS(parse_remote_response("not json"), MalformedResponse);
  // Scores thresholding to ESFP contradict the declared type.
  CHECK_THROWS_AS(parse_remote_response(R"({"type":"INFJ","scores":[0.9,0.1,0.1,0.1]})"),
                  MalformedResponse);
}

TEST_CASE("RemoteDetector round-trips against a local mock endpoint") {
  httplib::Server server;
  server.Post("/predict", [](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.body.find("\"documents\"") != std::string::npos);
    res.set_content(R"({"type":"INFJ","scores":[0.2,0.9,0.3,0.8]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteDetectorConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  RemoteDetector detector(config);
  const auto pred = detector.predict(DocumentSet{{"some text", "more text"}});
  CHECK(pred.mbti.code() == "INFJ");

  server.stop();
  server_thread.join();
}

TEST_CASE("RemoteDetector surfaces timeouts and transport errors") {
  SUBCASE("no listener -> TransportError") {
    RemoteDetectorConfig config;
    config.base_url = "http://127.0.0.1:1";  // nothing listens here
    config.timeout_seconds = 2;
    RemoteDetector detector(config);
    CHECK_THROWS_AS(detector.predict(DocumentSet{{"text"}}), TransportError);
  }
  SUBCASE("slow endpoint -> RemoteTimeout") {
    httplib::Server server;
    server.Post("/predict", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2500));
      res.set_content("{}", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteDetectorConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.timeout_seconds = 1;
    RemoteDetector detector(config);
    CHECK_THROWS_AS(detector.predict(DocumentSet{{"text"}}), RemoteTimeout);

    server.stop();
    server_thread.join();
  }
}
