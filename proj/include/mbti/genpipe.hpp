#pragma once
// Prompting pipeline: role templates, a chat-completion provider
// abstraction (real HTTP client + deterministic mock), and a bounded
// concurrent batch runner with retries.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbti/corpus.hpp"

namespace mbti {

enum class Role { Post, Comment };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct GenerationConfig {
  double temperature = 0.2;
  double top_p = 0.95;
  uint32_t max_tokens = 200;
};

struct GenerationTask {
  std::string id;
  Role role = Role::Post;
  std::string content;  // summarized event for Post, source tweet for Comment
  std::optional<std::string> topic;
};

struct EmptyContent : std::runtime_error {
  explicit EmptyContent(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RenderedPrompt {
  std::string system_message;
  std::string user_message;
};

// Byte-exact role templates; throws EmptyContent when the task content is
// blank after trimming.
RenderedPrompt render_prompt(const GenerationTask& task);

// One chat-completion call. Implementations must be safely shareable
// across concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  // Throws TransportError / RemoteTimeout / RateLimited on failure.
  virtual std::string complete(const RenderedPrompt& prompt, const GenerationConfig& config) = 0;
};

struct RateLimited : std::runtime_error {
  explicit RateLimited(const std::string& what, std::optional<double> retry_after_s = {})
      : std::runtime_error(what), retry_after_seconds(retry_after_s) {}
  std::optional<double> retry_after_seconds;
};

// Deterministic in-process provider: echoes "MOCK:<role>:<content hash>".
std::shared_ptr<Provider> make_mock_provider();
// Fails every call for the given task-content hashes; for failure-path tests.
std::shared_ptr<Provider> make_failing_mock_provider(std::vector<std::string> failing_contents);

struct OpenAiProviderConfig {
  std::string base_url;                       // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";  // key read from environment only
  int timeout_seconds = 60;
};

// OpenAI-compatible chat-completion client. Throws ConfigError when the
// API key environment variable is unset.
std::shared_ptr<Provider> make_openai_provider(const OpenAiProviderConfig& config);

struct GenerationFailure {
  std::string task_id;
  std::string error;
  uint32_t attempts = 0;
};

struct RetryPolicy {
  uint32_t max_attempts = 3;
  double base_backoff_seconds = 1.0;  // 1s, 2s, 4s, jittered
  uint64_t jitter_seed = 0;
};

struct GenerationResult {
  std::vector<GeneratedText> outputs;   // in task order
  std::vector<GenerationFailure> failures;
};

// Runs every task with at most `parallelism` requests in flight. Output
// order matches task order; per-task failures are recorded, never fatal.
GenerationResult run_generation(const std::vector<GenerationTask>& tasks, Provider& provider,
                                const GenerationConfig& config, uint32_t parallelism,
                                const RetryPolicy& retry = {});

// Post tasks from the events file, Comment tasks from the tweets file;
// both line-delimited {id, topic, text}. Either path may be empty.
std::vector<GenerationTask> load_content_sources(const std::string& events_path,
                                                 const std::string& tweets_path);

}  // namespace mbti
