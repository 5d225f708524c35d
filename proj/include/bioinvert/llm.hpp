#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "bioinvert/corpus.hpp"
#include "bioinvert/error.hpp"
#include "bioinvert/kb.hpp"
#include "bioinvert/knowledge.hpp"

namespace bioinvert {

enum class TaskKind { Label, Paraphrase, Correct, Summarize };
std::string_view to_string(TaskKind k);

struct LlmTask {
  TaskKind kind = TaskKind::Label;
  std::string prompt_template_id;
  std::string payload;
  std::string expected_shape;
};

// Task with the registry's current template and response shape for `kind`.
LlmTask make_task(TaskKind kind, std::string payload);

struct LlmUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct LlmResponse {
  std::string raw;
  Json parsed;
  LlmUsage usage;
  int attempt = 0;  // 0-based index of the attempt that succeeded
};

// Versioned prompt templates (prompts/<id>.txt), each with a {{payload}} slot.
class PromptRegistry {
 public:
  static PromptRegistry load(const std::string& dir);
  static const PromptRegistry& shipped();  // BIOINVERT_DATA_DIR/prompts

  bool contains(std::string_view id) const { return templates_.contains(std::string(id)); }
  const std::string& get(std::string_view id) const;
  std::string render(const LlmTask& task) const;

 private:
  std::map<std::string, std::string> templates_;
};

// Validates a reply against a named response shape; throws SchemaRejected.
Json parse_reply(std::string_view expected_shape, std::string_view raw);

class RateLimitedError : public Error {
 public:
  RateLimitedError(std::string message, std::chrono::milliseconds retry_after)
      : Error(ErrorCode::RateLimited, std::move(message)), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

struct BackendReply {
  std::string text;
  LlmUsage usage;
};

// Transport errors are reported as Error{AuthError|TransportError} or
// RateLimitedError. Implementations must be thread-safe.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual BackendReply send(const LlmTask& task, const std::string& prompt) const = 0;
  virtual std::string_view name() const = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  std::chrono::milliseconds backoff(int attempt) const;  // delay after failed attempt `attempt`
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper thread_sleeper();

// Sends, validates and retries: transport errors and invalid replies are
// retried with backoff, rate limits wait for Retry-After, credential errors
// are not retried.
LlmResponse complete(const LlmBackend& backend, const PromptRegistry& prompts, const LlmTask& task,
                     const RetryPolicy& policy, const Sleeper& sleep = thread_sleeper());

// Deterministic offline backend driven by fixtures/llm-mock.json.
class MockBackend final : public LlmBackend {
 public:
  explicit MockBackend(Json table);
  static std::shared_ptr<MockBackend> from_file(const std::string& path);
  static std::shared_ptr<MockBackend> shipped();

  BackendReply send(const LlmTask& task, const std::string& prompt) const override;
  std::string_view name() const override { return "mock"; }

 private:
  std::string label(std::string_view sentence) const;
  std::string paraphrase(const Json& payload) const;
  std::string correct(const Json& payload) const;
  std::string summarize(const Json& payload) const;

  std::vector<std::pair<std::string, std::vector<std::string>>> label_keywords_;
  std::vector<std::vector<std::string>> synonym_groups_;
  std::vector<std::pair<std::string, std::string>> summaries_;
  struct Correction {
    std::string term, replacement, justification;
  };
  std::vector<Correction> corrections_;
};

struct HttpConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4o-mini";
  std::string api_key;  // from BIOINVERT_LLM_KEY, never persisted
  int max_in_flight = 4;
  int timeout_seconds = 60;
  std::optional<std::string> trace_path;  // JSONL, credential redacted
};

// OpenAI-compatible chat-completions client.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpConfig config);
  BackendReply send(const LlmTask& task, const std::string& prompt) const override;
  std::string_view name() const override { return "http"; }

 private:
  void trace(const Json& entry) const;

  HttpConfig config_;
  mutable std::counting_semaphore<256> in_flight_;
  mutable std::mutex trace_mutex_;
};

// Backend + prompts + retry policy, with typed helpers per task.
class LlmBridge {
 public:
  LlmBridge(std::shared_ptr<const LlmBackend> backend, RetryPolicy policy = {}, Sleeper sleeper = thread_sleeper(),
            const PromptRegistry* prompts = nullptr);

  LlmResponse complete(const LlmTask& task) const;

  LabelSet label(std::string_view sentence) const;
  std::string paraphrase(std::string_view text, std::uint64_t variant) const;
  std::string summarize(const std::vector<std::string>& sentences) const;

  struct TermReplacement {
    std::string term;
    std::string replacement;
    std::string justification;
  };
  std::vector<TermReplacement> correct(const std::vector<SlotText>& phrases, const EngineeringKB& kb) const;

  const LlmBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<const LlmBackend> backend_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  const PromptRegistry* prompts_;
};

// Classifier over the Label task. Transport failures surface as
// ClassifierUnavailable so callers can fall back to the lexicon.
class LlmClassifier final : public Classifier {
 public:
  explicit LlmClassifier(const LlmBridge& bridge) : bridge_(bridge) {}
  DimensionScores score(const SentenceRecord& sentence) const override;
  LabelSource source() const override { return LabelSource::Llm; }

 private:
  const LlmBridge& bridge_;
};

class LlmParaphraser final : public Paraphraser {
 public:
  explicit LlmParaphraser(const LlmBridge& bridge) : bridge_(bridge) {}
  std::string paraphrase(std::string_view text, std::uint64_t variant) const override {
    return bridge_.paraphrase(text, variant);
  }

 private:
  const LlmBridge& bridge_;
};

struct FrameChange {
  std::string path;
  std::string before;
  std::string after;
  std::string justification;
  friend bool operator==(const FrameChange&, const FrameChange&) = default;
};

struct CorrectedFrame {
  StrategyFrame frame;
  std::vector<FrameChange> changes;
};

// Phrases that still hold unmapped biological terms or a disallowed term pair.
std::vector<SlotText> phrases_needing_correction(const StrategyFrame& frame, const EngineeringKB& kb);

// Logical correction against the KB. Only flagged phrases are sent to the
// backend; a frame with nothing flagged comes back unchanged.
CorrectedFrame correct_frame(const StrategyFrame& frame, const EngineeringKB& kb, const LlmBridge& bridge);

// Undoes the listed changes where the slot still holds the corrected text.
StrategyFrame revert_changes(const StrategyFrame& frame, const std::vector<FrameChange>& changes);

Json to_json(const FrameChange& c);
FrameChange frame_change_from_json(const Json& j, const std::string& path);

}  // namespace bioinvert
