#include "mbti/genpipe.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mbti/detector.hpp"
#include "mbti/hash.hpp"

namespace mbti {

std::string to_string(Role role) { return role == Role::Post ? "post" : "comment"; }

Role role_from_string(const std::string& s) {
  if (s == "post") return Role::Post;
  if (s == "comment") return Role::Comment;
  throw std::runtime_error("unknown role '" + s + "'");
}

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

constexpr const char* kPostSystem = "Generate a Twitter post";
constexpr const char* kPostUserPrefix = "As a user on Twitter, write a tweet on the following contents: ";
constexpr const char* kCommentSystem = "Generate a Twitter comment";
constexpr const char* kCommentUserPrefix = "As a user on Twitter, write a tweet to comment on this Tweet: ";

std::string rfc3339_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RenderedPrompt render_prompt(const GenerationTask& task) {
  if (trim_copy(task.content).empty()) {
    throw EmptyContent("task '" + task.id + "' has blank content");
  }
  if (task.role == Role::Post) {
    return {kPostSystem, kPostUserPrefix + task.content};
  }
  return {kCommentSystem, kCommentUserPrefix + task.content};
}

namespace {

// Recovers (role, content) from a rendered prompt; used by the mock.
std::pair<std::string, std::string> unrender(const RenderedPrompt& prompt) {
  if (prompt.system_message == kPostSystem) {
    return {"post", prompt.user_message.substr(std::string(kPostUserPrefix).size())};
  }
  return {"comment", prompt.user_message.substr(std::string(kCommentUserPrefix).size())};
}

class MockProvider : public Provider {
 public:
  std::string name() const override { return "mock"; }
  std::string complete(const RenderedPrompt& prompt, const GenerationConfig&) override {
    const auto [role, content] = unrender(prompt);
    return "MOCK:" + role + ":" + hash_hex(content);
  }
};

class FailingMockProvider : public Provider {
 public:
  explicit FailingMockProvider(std::vector<std::string> failing) : failing_(std::move(failing)) {}
  std::string name() const override { return "failing-mock"; }
  std::string complete(const RenderedPrompt& prompt, const GenerationConfig& config) override {
    const auto [role, content] = unrender(prompt);
    if (std::find(failing_.begin(), failing_.end(), content) != failing_.end()) {
      throw TransportError("injected failure for task content");
    }
    return inner_.complete(prompt, config);
  }

 private:
  std::vector<std::string> failing_;
  MockProvider inner_;
};

class OpenAiProvider : public Provider {
 public:
  explicit OpenAiProvider(OpenAiProviderConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
    if (config_.base_url.empty()) throw ConfigError("provider base_url is empty");
  }

  std::string name() const override { return config_.model; }

  std::string complete(const RenderedPrompt& prompt, const GenerationConfig& config) override {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    const nlohmann::json body{
        {"model", config_.model},
        {"messages",
         {{{"role", "system"}, {"content", prompt.system_message}},
          {{"role", "user"}, {"content", prompt.user_message}}}},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"max_tokens", config.max_tokens}};

    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw RemoteTimeout("provider timeout");
      }
      throw TransportError(httplib::to_string(err));
    }
    if (res->status == 429) {
      std::optional<double> retry_after;
      if (res->has_header("Retry-After")) {
        retry_after = std::stod(res->get_header_value("Retry-After"));
      }
      throw RateLimited("provider rate limit", retry_after);
    }
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status));

    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw TransportError("provider returned non-JSON body");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected provider response: ") + e.what());
    }
  }

 private:
  OpenAiProviderConfig config_;
  std::string api_key_;
};

}  // namespace

std::shared_ptr<Provider> make_mock_provider() { return std::make_shared<MockProvider>(); }

std::shared_ptr<Provider> make_failing_mock_provider(std::vector<std::string> failing_contents) {
  return std::make_shared<FailingMockProvider>(std::move(failing_contents));
}

std::shared_ptr<Provider> make_openai_provider(const OpenAiProviderConfig& config) {
  return std::make_shared<OpenAiProvider>(config);
}

GenerationResult run_generation(const std::vector<GenerationTask>& tasks, Provider& provider,
                                const GenerationConfig& config, uint32_t parallelism,
                                const RetryPolicy& retry) {
  if (parallelism == 0) throw ConfigError("parallelism must be positive");

  struct Slot {
    std::optional<GeneratedText> output;
    std::optional<GenerationFailure> failure;
  };
  std::vector<Slot> slots(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const GenerationTask& task = tasks[i];

      std::mt19937_64 jitter_rng(derive_seed(retry.jitter_seed, i));
      std::string last_error;
      uint32_t attempt = 0;
      for (; attempt < retry.max_attempts; ++attempt) {
        if (attempt > 0) {
          double delay = retry.base_backoff_seconds * static_cast<double>(1u << (attempt - 1));
          delay *= 1.0 + 0.25 * static_cast<double>(bounded_draw(jitter_rng, 1000)) / 1000.0;
          std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        try {
          const RenderedPrompt prompt = render_prompt(task);
          const std::string text = provider.complete(prompt, config);
          GeneratedText out;
          out.id = task.id;
          out.role = to_string(task.role);
          out.source = hash_hex(task.content);
          out.model = provider.name();
          out.text = text;
          out.created_at = rfc3339_now();
          slots[i].output = std::move(out);
          break;
        } catch (const RateLimited& e) {
          last_error = e.what();
          if (e.retry_after_seconds && attempt + 1 < retry.max_attempts) {
            std::this_thread::sleep_for(std::chrono::duration<double>(*e.retry_after_seconds));
          }
        } catch (const EmptyContent& e) {
          last_error = e.what();
          attempt = retry.max_attempts;  // not retryable
          break;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      if (!slots[i].output) {
        slots[i].failure = GenerationFailure{task.id, last_error, std::min(attempt, retry.max_attempts)};
      }
    }
  };

  const uint32_t n_threads = std::min<uint32_t>(parallelism, std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (uint32_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  GenerationResult result;
  for (auto& slot : slots) {
    if (slot.output) result.outputs.push_back(std::move(*slot.output));
    else result.failures.push_back(std::move(*slot.failure));
  }
  return result;
}

namespace {

void load_tasks_from(const std::string& path, Role role, std::vector<GenerationTask>& out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError(line_no, "not a JSON object");
    GenerationTask task;
    task.role = role;
    try {
      task.id = j.at("id").get<std::string>();
      task.content = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(line_no, e.what());
    }
    if (j.contains("topic")) task.topic = j.at("topic").get<std::string>();
    if (trim_copy(task.content).empty()) throw SchemaError(line_no, "empty text");
    out.push_back(std::move(task));
  }
}

}  // namespace

std::vector<GenerationTask> load_content_sources(const std::string& events_path,
                                                 const std::string& tweets_path) {
  std::vector<GenerationTask> tasks;
  if (!events_path.empty()) load_tasks_from(events_path, Role::Post, tasks);
  if (!tweets_path.empty()) load_tasks_from(tweets_path, Role::Comment, tasks);
  return tasks;
}

}  // namespace mbti
