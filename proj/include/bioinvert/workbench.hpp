#pragma once

// Project orchestration. A project is a directory holding
//
//   bioinvert.json   configuration (port, LLM endpoint, thresholds, defaults)
//   state.json       the materialized project state
//   events.jsonl     append-only event log
//
// Every mutation is an Event applied through apply_event(); the state file is
// a cache of replaying the log, and replay() must reproduce it byte-for-byte
// when the backends are deterministic (lexicon, mock).

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bioinvert/corpus.hpp"
#include "bioinvert/decision.hpp"
#include "bioinvert/inversion.hpp"
#include "bioinvert/kb.hpp"
#include "bioinvert/llm.hpp"

namespace bioinvert {

enum class Stage { Ingested, Classified, Reviewed, Framed, Inverted, Screened, Ranked, Clustered };
inline constexpr std::size_t kStageCount = 8;

std::string_view to_string(Stage s);
// Case-insensitive; throws InvalidArgument.
Stage stage_from_string(std::string_view s);

inline constexpr int kProjectFormatVersion = 1;

struct ProjectConfig {
  int port = 8080;
  std::string llm_base_url = "https://api.openai.com";
  std::string llm_model = "gpt-4o-mini";
  int llm_max_in_flight = 4;
  int llm_timeout_seconds = 60;
  std::optional<std::string> llm_trace_path;
  double label_threshold = kDefaultThreshold;
  double cluster_threshold = 0.5;
  double ratio_default = 1.2;
  double strategy_weight = kDefaultStrategyWeight;
  std::size_t review_max_rounds = kDefaultMaxRounds;
};

Json to_json(const ProjectConfig& c);
ProjectConfig config_from_json(const Json& j, const std::string& path = "");

struct Event {
  std::uint64_t seq = 0;
  std::string type;
  Json params = Json::object();
};

Json to_json(const Event& e);
Event event_from_json(const Json& j, const std::string& path = "");

struct StageStatus {
  bool complete = false;
  bool stale = false;
};

struct ProjectState {
  std::string id;
  std::string name;
  EngineeringKB kb;
  std::vector<Document> documents;
  std::string label_backend = "lexicon";
  double label_threshold = kDefaultThreshold;
  std::vector<LabeledSentence> labeled;
  std::uint64_t review_seed = 0;
  std::vector<ReviewBatch> batches;
  std::optional<Json> samples;
  std::vector<ElementaryStrategy> elementary;
  std::vector<StrategyFrame> frames;
  std::vector<InversionResult> inversions;
  std::map<std::string, ScreenVerdict> screening;
  std::vector<std::string> kept;
  std::optional<DesignProblem> problem;  // unset: no requirements to score against
  std::optional<EnvironmentDesc> target_environment;
  CriteriaSet criteria = default_criteria();
  G1Judgment judgment = default_judgment();
  ManualScores manual_scores;
  std::optional<DecisionRun> decision;
  std::optional<ClusterReport> clusters;
  std::map<std::string, std::string> cluster_assessments;  // cluster index -> designer note
  std::array<StageStatus, kStageCount> stages{};
  std::map<std::string, Json> stage_reports;  // stage name -> last report
  std::uint64_t head = 0;                     // seq of the last applied event

  StageStatus& status(Stage s) { return stages[static_cast<std::size_t>(s)]; }
  const StageStatus& status(Stage s) const { return stages[static_cast<std::size_t>(s)]; }
  // Furthest stage reached through an unbroken run of complete, fresh stages.
  std::optional<Stage> current_stage() const;
  const InversionResult* find_inversion(const std::string& id) const;
};

Json to_json(const ProjectState& s);
ProjectState project_from_json(const Json& j, const std::string& path = "");
// Canonical text of the state document; equality of projects is equality of this.
std::string serialize_state(const ProjectState& s);

// Everything non-deterministic a stage may need, injected so tests and
// replay can pin it down.
struct Services {
  // "mock" | "llm"; null for unknown names.
  std::function<std::shared_ptr<const LlmBackend>(std::string_view name)> backend;
  RetryPolicy retry;
  Sleeper sleeper = thread_sleeper();
};

// mock -> shipped mock table; llm -> HTTP client from the config with the
// key taken from BIOINVERT_LLM_KEY.
Services default_services(const ProjectConfig& config);

// Cooperative cancellation: stages poll this between work items.
using CancelFlag = std::atomic<bool>;

// Applies one event to `state` (in place; callers wanting atomicity pass a
// copy). Returns the event's report document. Errors leave `state` in an
// unspecified but valid condition.
Json apply_event(ProjectState& state, const Event& event, const Services& services,
                 const CancelFlag* cancel = nullptr);

ProjectState replay(const std::vector<Event>& events, const Services& services);

// On-disk project. Writers are serialized by an advisory lock on
// <dir>/.lock; state.json is replaced by write-temp-then-rename.
class Project {
 public:
  static Project create(const std::filesystem::path& dir, const std::string& name,
                        const std::optional<EngineeringKB>& kb = std::nullopt, const ProjectConfig& config = {});
  // Throws IoError, VersionMismatch or SchemaError; nothing on disk is touched.
  static Project open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const ProjectState& state() const { return state_; }
  const ProjectConfig& config() const { return config_; }
  std::vector<Event> events() const;

  // Validates and applies an event, then appends it to the log and persists
  // the new state. With expected_head set, a different on-disk head raises
  // Conflict. Returns {"event": ..., "report": ...}.
  Json submit(const std::string& type, Json params, const Services& services,
              std::optional<std::uint64_t> expected_head = std::nullopt, const CancelFlag* cancel = nullptr);

  // Bundle of config, state and event log.
  Json export_bundle() const;

 private:
  Project(std::filesystem::path dir, ProjectConfig config, ProjectState state)
      : dir_(std::move(dir)), config_(std::move(config)), state_(std::move(state)) {}

  std::filesystem::path dir_;
  ProjectConfig config_;
  ProjectState state_;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Background stage runs with polled status and cancellation.
class JobManager {
 public:
  enum class Status { Running, Succeeded, Failed, Cancelled };

  struct Info {
    std::string id;
    std::string project;
    std::string description;
    Status status = Status::Running;
    Json result;  // report on success, error envelope on failure
  };

  using Task = std::function<Json(const CancelFlag&)>;

  JobManager() = default;
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;
  ~JobManager();

  std::string start(std::string project, std::string description, Task task);
  std::optional<Info> get(const std::string& id) const;
  std::vector<Info> list() const;
  // False when the job is unknown or already finished.
  bool cancel(const std::string& id);
  void wait(const std::string& id);

 private:
  struct Job {
    Info info;
    CancelFlag cancel{false};
    std::jthread thread;
  };
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  std::uint64_t next_ = 1;
};

std::string_view to_string(JobManager::Status s);
Json to_json(const JobManager::Info& info);

// {code, message, path} for any Error.
Json error_envelope(const Error& e);

}  // namespace bioinvert
