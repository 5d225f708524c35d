// bioinvert command-line front end. Each command is a thin wrapper over one
// workbench event; the printed JSON is the event report.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bioinvert/server.hpp"
#include "bioinvert/workbench.hpp"
#include "bioinvert/schema.hpp"

namespace fs = std::filesystem;
using namespace bioinvert;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::string& path) { return schema::parse(read_text(path), path); }

std::vector<double> parse_ratios(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "not a number: '" + item + "'", "/ratios");
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

WorkbenchServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bioinvert - biological strategy inversion workbench"};
  app.require_subcommand(1);

  std::string project_dir = ".";
  std::uint64_t seed = 0;
  std::string backend = "lexicon";
  app.add_option("--project", project_dir, "Project directory")->capture_default_str();
  app.add_option("--seed", seed, "Seed for randomized steps")->capture_default_str();
  auto* backend_opt = app.add_option("--backend", backend, "Text backend")
                          ->check(CLI::IsMember({"lexicon", "llm", "mock"}))
                          ->capture_default_str();

  // new
  auto* cmd_new = app.add_subcommand("new", "Create a project");
  std::string name, kb_path;
  cmd_new->add_option("--name", name, "Display name");
  cmd_new->add_option("--kb", kb_path, "Engineering knowledge base (JSON)")->check(CLI::ExistingFile);

  // ingest
  auto* cmd_ingest = app.add_subcommand("ingest", "Add text documents (.txt files or .jsonl records)");
  std::vector<std::string> inputs;
  cmd_ingest->add_option("files", inputs, "Input files")->required()->check(CLI::ExistingFile);

  auto* cmd_classify = app.add_subcommand("classify", "Label every sentence");
  std::optional<double> threshold;
  cmd_classify->add_option("--threshold", threshold, "Label threshold in (0,1)");

  auto* cmd_review = app.add_subcommand("review", "Build review batches, record verdicts or relabel");
  bool auto_pass = false, relabel = false;
  std::optional<std::uint64_t> batch_size, batch_no;
  std::string verdicts_path;
  cmd_review->add_flag("--auto-pass", auto_pass, "Accept every audited sentence");
  cmd_review->add_option("--batch-size", batch_size, "Sentences per batch");
  cmd_review->add_option("--batch", batch_no, "Batch number for --verdicts");
  cmd_review->add_option("--verdicts", verdicts_path, "JSON object sentence id -> Pass|Fail")->check(CLI::ExistingFile);
  cmd_review->add_flag("--relabel", relabel, "Relabel and re-audit Dirty batches");

  auto* cmd_samples = app.add_subcommand("samples", "Generate training samples from reviewed sentences");
  std::uint64_t target = 0;
  double ratio = 0.8;
  cmd_samples->add_option("--target", target, "Sample set size")->required();
  cmd_samples->add_option("--ratio", ratio, "Share of real sentences")->capture_default_str();

  auto* cmd_frame = app.add_subcommand("frame", "Build one strategy frame per document");
  std::string summarizer;
  cmd_frame->add_option("--summarizer", summarizer, "rule|mock|llm")->check(CLI::IsMember({"rule", "mock", "llm"}));

  auto* cmd_invert = app.add_subcommand("invert", "Map frames onto engineering vocabulary");
  std::string corrector;
  cmd_invert->add_option("--corrector", corrector, "none|mock|llm")->check(CLI::IsMember({"none", "mock", "llm"}));

  auto* cmd_screen = app.add_subcommand("screen", "Record screening verdicts and keep the survivors");
  bool keep_all = false;
  std::string screen_path;
  cmd_screen->add_flag("--keep-all", keep_all, "Keep every result without a verdict");
  cmd_screen->add_option("--verdicts", screen_path, "JSON object id -> {keep, reason}")->check(CLI::ExistingFile);

  auto* cmd_rank = app.add_subcommand("rank", "G1-weighted VIKOR ranking of kept strategies");
  std::string judgment_path, manual_path, problem_path;
  std::optional<double> v;
  cmd_rank->add_option("--judgment", judgment_path, "JSON {order, ratios}")->check(CLI::ExistingFile);
  cmd_rank->add_option("--manual", manual_path, "JSON alternative -> criterion -> score")->check(CLI::ExistingFile);
  cmd_rank->add_option("--problem", problem_path, "JSON {problem, target_environment}")->check(CLI::ExistingFile);
  cmd_rank->add_option("--v", v, "Strategy weight in [0,1]");

  auto* cmd_cluster = app.add_subcommand("cluster", "Cluster the top-ranked strategies");
  std::optional<std::uint64_t> k;
  std::optional<double> cluster_threshold;
  cmd_cluster->add_option("--k", k, "How many ranked strategies to cluster");
  cmd_cluster->add_option("--threshold", cluster_threshold, "Merge threshold in (0,1]");

  auto* cmd_export = app.add_subcommand("export", "Write the project bundle");
  std::string out_path;
  cmd_export->add_option("--out", out_path, "Output file (stdout when absent)");

  auto* cmd_g1 = app.add_subcommand("g1", "Compute G1 weights");
  std::string order_csv, ratios_csv;
  cmd_g1->add_option("--order", order_csv, "Comma-separated criterion ids, most important first");
  cmd_g1->add_option("--ratios", ratios_csv, "Comma-separated r_2..r_m")->required();

  auto* cmd_status = app.add_subcommand("status", "Show project state");
  bool full = false;
  cmd_status->add_flag("--full", full, "Print the whole state document");

  auto* cmd_replay = app.add_subcommand("replay", "Replay the event log and compare with the stored state");

  auto* cmd_serve = app.add_subcommand("serve", "Run the HTTP API");
  ServerConfig scfg;
  std::string static_dir, root;
  cmd_serve->add_option("--root", root, "Directory holding projects (default: --project)");
  cmd_serve->add_option("--host", scfg.host)->capture_default_str();
  cmd_serve->add_option("--port", scfg.port)->capture_default_str();
  cmd_serve->add_option("--static", static_dir, "Serve UI assets from this directory")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir = project_dir;
    const auto submit = [&](const std::string& type, Json params) {
      auto p = Project::open(dir);
      const auto out = p.submit(type, std::move(params), default_services(p.config()));
      std::cout << out["report"].dump(2) << "\n";
    };
    const auto stage = [&](const char* name, Json params) {
      params["stage"] = name;
      submit("stage.run", std::move(params));
    };

    if (*cmd_new) {
      std::optional<EngineeringKB> kb;
      if (!kb_path.empty()) kb = load_kb_file(kb_path);
      auto p = Project::create(dir, name, kb);
      std::cout << Json{{"id", p.state().id}, {"dir", fs::absolute(dir).string()}}.dump(2) << "\n";
    } else if (*cmd_ingest) {
      Json docs = Json::array();
      for (const auto& f : inputs) {
        if (fs::path(f).extension() == ".jsonl") {
          std::ifstream in(f);
          for (const auto& d : read_document_records(in)) docs.push_back({{"doc_id", d.doc_id}, {"text", d.text}});
        } else {
          docs.push_back({{"doc_id", fs::path(f).stem().string()}, {"text", read_text(f)}});
        }
      }
      stage("Ingested", Json{{"documents", docs}});
    } else if (*cmd_classify) {
      Json p{{"backend", backend}};
      if (threshold) p["threshold"] = *threshold;
      stage("Classified", p);
    } else if (*cmd_review) {
      if (!verdicts_path.empty()) {
        if (!batch_no) throw Error(ErrorCode::InvalidArgument, "--verdicts needs --batch", "/batch_no");
        submit("review.verdicts", Json{{"batch_no", *batch_no}, {"verdicts", read_json(verdicts_path)}});
      } else if (relabel) {
        submit("review.relabel", Json::object());
      } else {
        Json p{{"seed", seed}};
        if (batch_size) p["batch_size"] = *batch_size;
        if (auto_pass) p["auto_audit"] = "pass";
        stage("Reviewed", p);
      }
    } else if (*cmd_samples) {
      submit("samples.generate", Json{{"target", target},
                                      {"ratio_real", ratio},
                                      {"seed", seed},
                                      {"backend", backend == "lexicon" ? "mock" : backend}});
    } else if (*cmd_frame) {
      Json p = Json::object();
      if (!summarizer.empty()) p["summarizer"] = summarizer;
      else if (backend_opt->count() > 0) p["summarizer"] = backend == "lexicon" ? "rule" : backend;
      stage("Framed", p);
    } else if (*cmd_invert) {
      Json p = Json::object();
      if (!corrector.empty()) p["corrector"] = corrector;
      else if (backend_opt->count() > 0) p["corrector"] = backend == "lexicon" ? "none" : backend;
      stage("Inverted", p);
    } else if (*cmd_screen) {
      Json p = Json::object();
      if (!screen_path.empty()) p["verdicts"] = read_json(screen_path);
      if (keep_all) p["default_keep"] = true;
      stage("Screened", p);
    } else if (*cmd_rank) {
      Json p = Json::object();
      if (!judgment_path.empty()) p["judgment"] = read_json(judgment_path);
      if (!manual_path.empty()) p["manual_scores"] = read_json(manual_path);
      if (!problem_path.empty()) {
        const auto doc = read_json(problem_path);
        schema::allow_keys(doc, problem_path, {"problem", "target_environment"});
        for (auto it = doc.begin(); it != doc.end(); ++it) p[it.key()] = it.value();
      }
      if (v) p["v"] = *v;
      stage("Ranked", p);
    } else if (*cmd_cluster) {
      Json p = Json::object();
      if (k) p["k"] = *k;
      if (cluster_threshold) p["threshold"] = *cluster_threshold;
      stage("Clustered", p);
    } else if (*cmd_export) {
      const auto bundle = Project::open(dir).export_bundle().dump(2) + "\n";
      if (out_path.empty()) std::cout << bundle;
      else write_file_atomic(out_path, bundle);
    } else if (*cmd_g1) {
      G1Judgment j;
      j.ratios = parse_ratios(ratios_csv);
      if (order_csv.empty()) {
        for (const auto& c : default_criteria()) j.order.push_back(c.id);
        std::cout << Json{{"weights", g1_weights(j, default_criteria())}}.dump(2) << "\n";
      } else {
        j.order = split_csv(order_csv);
        std::cout << Json{{"weights", g1_weights(j)}}.dump(2) << "\n";
      }
    } else if (*cmd_status) {
      auto p = Project::open(dir);
      if (full) {
        std::cout << serialize_state(p.state());
      } else {
        const auto st = to_json(p.state());
        std::cout << Json{{"id", st["id"]}, {"name", st["name"]}, {"head", st["head"]}, {"stage", st["stage"]},
                          {"stages", st["stages"]}}
                         .dump(2)
                  << "\n";
      }
    } else if (*cmd_replay) {
      auto p = Project::open(dir);
      const auto replayed = replay(p.events(), default_services(p.config()));
      const bool same = serialize_state(replayed) == serialize_state(p.state());
      std::cout << Json{{"events", p.state().head}, {"identical", same}}.dump(2) << "\n";
      return same ? 0 : 1;
    } else if (*cmd_serve) {
      scfg.root = root.empty() ? dir : fs::path(root);
      if (!static_dir.empty()) scfg.static_dir = static_dir;
      WorkbenchServer server(scfg);
      const int port = server.bind();
      std::cerr << "bioinvert: serving " << fs::absolute(scfg.root).string() << " on http://" << scfg.host << ":" << port
                << "\n";
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      server.serve();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << error_envelope(e).dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bioinvert: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
