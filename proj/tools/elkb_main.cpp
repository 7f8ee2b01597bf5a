// elkb: single entry point for the offline (build-kb, index, prune-model) and
// online (query, link, serve, bench) workflows.
//
// Option precedence: built-in defaults < --config file < ELKB_* environment
// variables < explicit flags.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "elkb/dense.hpp"
#include "elkb/errors.hpp"
#include "elkb/evalbench.hpp"
#include "elkb/ingest.hpp"
#include "elkb/kb.hpp"
#include "elkb/lex_index.hpp"
#include "elkb/mention.hpp"
#include "elkb/model_container.hpp"
#include "elkb/pipeline.hpp"
#include "elkb/service.hpp"
#include "elkb/version.hpp"
#include "nlohmann/json.hpp"

using nlohmann::json;

namespace {

std::string g_log_level = "info";

bool json_errors() { return g_log_level == "json"; }

void report_error(const std::string& code, const std::string& message) {
  if (json_errors()) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  } else {
    std::cerr << "elkb: error: " << message << "\n";
  }
}

void warn(const std::string& message) {
  if (g_log_level == "error") return;
  if (json_errors())
    std::cerr << json{{"warning", message}}.dump() << "\n";
  else
    std::cerr << "elkb: warning: " << message << "\n";
}

// Flat key=value config file; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw elkb::IoError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw elkb::ValidationError("bad config line (expected key = value): " + line);
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

std::string env_name_for(const std::string& key) {
  std::string out = "ELKB_";
  for (char c : key) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(c)));
  return out;
}

struct Binder {
  std::map<std::string, std::string> config;

  CLI::Option* bind(CLI::Option* opt, const std::string& key) const {
    auto it = config.find(key);
    if (it != config.end()) opt->default_val(it->second);
    opt->envname(env_name_for(key));
    return opt;
  }
};

void apply_boosts(const std::vector<std::string>& boosts, double* title, double* description) {
  for (const auto& b : boosts) {
    size_t eq = b.find('=');
    if (eq == std::string::npos)
      throw elkb::ValidationError("bad --boost value (expected field=number): " + b);
    std::string field = b.substr(0, eq);
    double value = std::stod(b.substr(eq + 1));
    if (value <= 0.0) throw elkb::ValidationError("boost must be positive: " + b);
    if (field == "title")
      *title = value;
    else if (field == "description")
      *description = value;
    else
      throw elkb::ValidationError("unknown boost field (title|description): " + field);
  }
}

elkb::MatchType parse_match_type(const std::string& s) {
  if (s == "best" || s == "best_fields") return elkb::MatchType::best_fields;
  if (s == "most" || s == "most_fields") return elkb::MatchType::most_fields;
  throw elkb::ValidationError("unknown match type (best|most): " + s);
}

// Everything a linker needs, loaded once and kept alive together.
struct Stack {
  std::unique_ptr<elkb::KbReader> kb;
  elkb::LexIndex index;
  elkb::Gazetteer gazetteer;
  std::unique_ptr<elkb::ContextEncoder> encoder;

  elkb::LinkerDeps deps() const {
    return {kb.get(), &index, &gazetteer, encoder.get()};
  }
};

std::unique_ptr<elkb::ContextEncoder> make_encoder(const std::string& spec, uint32_t dim) {
  if (spec == "stub") return std::make_unique<elkb::StubEncoder>(dim);
  const std::string prefix = "precomputed:";
  if (spec.rfind(prefix, 0) == 0)
    return std::make_unique<elkb::PrecomputedEncoder>(spec.substr(prefix.size()), dim);
  throw elkb::ValidationError("unknown encoder (stub|precomputed:PATH): " + spec);
}

std::shared_ptr<Stack> load_stack(const std::string& kb_path, const std::string& index_path,
                                  const std::string& encoder_spec,
                                  const std::string& alias_path) {
  auto stack = std::make_shared<Stack>();
  stack->kb = std::make_unique<elkb::KbReader>(kb_path);
  stack->index = elkb::load_index(index_path);
  if (stack->index.doc_count != stack->kb->entity_count())
    throw elkb::ValidationError("index doc count (" + std::to_string(stack->index.doc_count) +
                                ") does not match KB entity count (" +
                                std::to_string(stack->kb->entity_count()) + ")");
  std::optional<std::filesystem::path> alias;
  if (!alias_path.empty()) alias = alias_path;
  elkb::AliasLoadReport alias_report;
  stack->gazetteer = elkb::build_gazetteer(*stack->kb, alias, &alias_report);
  if (alias_report.rows_malformed > 0)
    warn(std::to_string(alias_report.rows_malformed) + " malformed alias rows skipped");
  stack->encoder = make_encoder(encoder_spec, stack->kb->embedding_dim());
  return stack;
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
  size_t colon = addr.rfind(':');
  if (colon == std::string::npos)
    throw elkb::ValidationError("bad --addr (expected HOST:PORT): " + addr);
  int port = std::stoi(addr.substr(colon + 1));
  if (port < 0 || port > 65535) throw elkb::ValidationError("bad port in --addr: " + addr);
  return {addr.substr(0, colon), port};
}

std::vector<elkb::ExternalSpan> parse_spans_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_array()) throw elkb::ValidationError("--spans must be a JSON array");
  std::vector<elkb::ExternalSpan> spans;
  for (const auto& s : j) {
    elkb::ExternalSpan span;
    span.start = s.at("start").get<size_t>();
    span.end = s.at("end").get<size_t>();
    span.label = s.value("label", std::string());
    spans.push_back(std::move(span));
  }
  return spans;
}

elkb::Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  // --config applies as option defaults, so it must be known before parsing.
  std::map<std::string, std::string> config;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    try {
      if (arg == "--config" && i + 1 < argc)
        config = read_config_file(argv[i + 1]);
      else if (arg.rfind("--config=", 0) == 0)
        config = read_config_file(arg.substr(9));
    } catch (const std::exception& e) {
      report_error("bad_config", e.what());
      return 1;
    }
  }
  Binder binder{config};

  CLI::App app{"embedded entity-linking engine"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags remain valid after the subcommand name
  app.set_version_flag("--version", std::string("elkb ") + elkb::kVersion + " (kb format " +
                                        std::to_string(elkb::kKbFormatVersion) +
                                        ", index format " +
                                        std::to_string(elkb::kIndexFormatVersion) +
                                        ", analyzer " + elkb::kAnalyzerTag + ")");
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file");
  binder.bind(app.add_option("--log-level", g_log_level,
                             "debug|info|warn|error|json (json: machine-readable errors)")
                  ->check(CLI::IsMember({"debug", "info", "warn", "error", "json"})),
              "log-level");

  // ---- build-kb ----
  auto* build = app.add_subcommand("build-kb", "build a filtered, enriched KB from a dump");
  std::string b_dump, b_mapping, b_out, b_ban = "person,disambiguation,location";
  bool b_drop_unmapped = false;
  binder.bind(build->add_option("--dump", b_dump, "entity dump JSONL")->required()
                  ->check(CLI::ExistingFile),
              "dump");
  binder.bind(build->add_option("--mapping", b_mapping, "wikipedia-to-wikidata TSV")
                  ->required()
                  ->check(CLI::ExistingFile),
              "mapping");
  binder.bind(build->add_option("--out", b_out, "output KB directory")->required(), "out");
  binder.bind(build->add_option("--ban", b_ban, "comma-separated banned instance_of tags"),
              "ban");
  binder.bind(build->add_flag("--drop-unmapped", b_drop_unmapped,
                              "drop entities without a Wikidata QID"),
              "drop-unmapped");

  // ---- index ----
  auto* index_cmd = app.add_subcommand("index", "build the lexical index for a KB");
  std::string i_kb, i_out;
  binder.bind(index_cmd->add_option("--kb", i_kb, "KB directory")->required()
                  ->check(CLI::ExistingDirectory),
              "kb");
  binder.bind(index_cmd->add_option("--out", i_out, "output index file")->required(), "out");

  // ---- query ----
  auto* query_cmd = app.add_subcommand("query", "run a multi-match query against an index");
  std::string q_index, q_text, q_match = "best";
  uint32_t q_k = 250;
  std::vector<std::string> q_boosts;
  binder.bind(query_cmd->add_option("--index", q_index, "index file")->required()
                  ->check(CLI::ExistingFile),
              "index");
  binder.bind(query_cmd->add_option("--text", q_text, "query text")->required(), "text");
  binder.bind(query_cmd->add_option("--k", q_k, "number of candidates"), "k");
  binder.bind(query_cmd->add_option("--match-type", q_match, "best|most"), "match-type");
  binder.bind(query_cmd->add_option("--boost", q_boosts, "field=value (repeatable)"), "boost");

  // ---- link ----
  auto* link_cmd = app.add_subcommand("link", "link mentions in one utterance");
  std::string l_kb, l_index, l_text, l_mode = "mmq", l_match = "best",
              l_encoder = "stub", l_alias, l_spans;
  uint32_t l_k = 250, l_echo = 0;
  std::vector<std::string> l_boosts;
  binder.bind(link_cmd->add_option("--kb", l_kb, "KB directory")->required()
                  ->check(CLI::ExistingDirectory),
              "kb");
  binder.bind(link_cmd->add_option("--index", l_index, "index file")->required()
                  ->check(CLI::ExistingFile),
              "index");
  binder.bind(link_cmd->add_option("--text", l_text, "utterance")->required(), "text");
  binder.bind(link_cmd->add_option("--k", l_k, "candidates per mention"), "k");
  binder.bind(link_cmd->add_option("--mode", l_mode, "mmq|cosine_knn|mmq_only"), "mode");
  binder.bind(link_cmd->add_option("--match-type", l_match, "best|most"), "match-type");
  binder.bind(link_cmd->add_option("--boost", l_boosts, "field=value (repeatable)"), "boost");
  binder.bind(link_cmd->add_option("--encoder", l_encoder, "stub|precomputed:PATH"), "encoder");
  binder.bind(link_cmd->add_option("--alias", l_alias, "gazetteer alias TSV"), "alias");
  binder.bind(link_cmd->add_option("--spans", l_spans,
                                   "JSON spans [{start,end,label?}] instead of detection"),
              "spans");
  binder.bind(link_cmd->add_option("--echo", l_echo, "echo top-N candidates per mention"),
              "echo");

  // ---- serve ----
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP linking service");
  std::string s_kb, s_index, s_addr = "127.0.0.1:8080", s_encoder = "stub", s_alias,
              s_mode = "mmq";
  uint32_t s_k = 250;
  int s_max_inflight = 64;
  binder.bind(serve_cmd->add_option("--kb", s_kb, "KB directory")->required()
                  ->check(CLI::ExistingDirectory),
              "kb");
  binder.bind(serve_cmd->add_option("--index", s_index, "index file")->required()
                  ->check(CLI::ExistingFile),
              "index");
  binder.bind(serve_cmd->add_option("--addr", s_addr, "HOST:PORT"), "addr");
  binder.bind(serve_cmd->add_option("--encoder", s_encoder, "stub|precomputed:PATH"),
              "encoder");
  binder.bind(serve_cmd->add_option("--alias", s_alias, "gazetteer alias TSV"), "alias");
  binder.bind(serve_cmd->add_option("--mode", s_mode, "default retrieval mode"), "mode");
  binder.bind(serve_cmd->add_option("--k", s_k, "default candidates per mention"), "k");
  binder.bind(serve_cmd->add_option("--max-inflight", s_max_inflight,
                                    "concurrent /link requests"),
              "max-inflight");

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "evaluate against a gold set");
  std::string be_kb, be_index, be_gold, be_sweep, be_out, be_encoder = "stub",
              be_mode = "mmq";
  uint32_t be_k = 250, be_repeat = 5;
  bool be_ablation = false;
  binder.bind(bench_cmd->add_option("--kb", be_kb, "KB directory")->required()
                  ->check(CLI::ExistingDirectory),
              "kb");
  binder.bind(bench_cmd->add_option("--index", be_index, "index file")->required()
                  ->check(CLI::ExistingFile),
              "index");
  binder.bind(bench_cmd->add_option("--gold", be_gold, "gold JSONL")->required()
                  ->check(CLI::ExistingFile),
              "gold");
  binder.bind(bench_cmd->add_option("--sweep", be_sweep, "comma-separated Ks, e.g. 100,250,500"),
              "sweep");
  binder.bind(bench_cmd->add_flag("--ablation", be_ablation, "run full vs mmq_only"),
              "ablation");
  binder.bind(bench_cmd->add_option("--repeat", be_repeat, "timing repetitions"), "repeat");
  binder.bind(bench_cmd->add_option("--out", be_out, "write JSON report here"), "out");
  binder.bind(bench_cmd->add_option("--encoder", be_encoder, "stub|precomputed:PATH"),
              "encoder");
  binder.bind(bench_cmd->add_option("--mode", be_mode, "mmq|cosine_knn|mmq_only"), "mode");
  binder.bind(bench_cmd->add_option("--k", be_k, "candidates per mention"), "k");

  // ---- prune-model ----
  auto* prune_cmd = app.add_subcommand("prune-model", "drop prefixed tensors from a container");
  std::string p_in, p_out, p_prefix = "cand_";
  binder.bind(prune_cmd->add_option("--in", p_in, "input model container")->required()
                  ->check(CLI::ExistingFile),
              "in");
  binder.bind(prune_cmd->add_option("--out", p_out, "output model container")->required(),
              "out");
  binder.bind(prune_cmd->add_option("--prefix", p_prefix, "tensor name prefix to remove"),
              "prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (build->parsed()) {
      elkb::FilterConfig filter;
      filter.banned_types.clear();
      size_t pos = 0;
      while (pos <= b_ban.size() && !b_ban.empty()) {
        size_t comma = b_ban.find(',', pos);
        std::string tag = b_ban.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        if (!tag.empty()) filter.banned_types.insert(tag);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      filter.drop_unmapped = b_drop_unmapped;
      elkb::BuildReport report = elkb::build_kb(b_dump, b_mapping, filter, b_out);
      if (report.malformed_lines > 0)
        warn(std::to_string(report.malformed_lines) + " malformed dump lines skipped");
      json out = {
          {"input_lines", report.input_lines},
          {"malformed_lines", report.malformed_lines},
          {"dropped_banned", report.dropped_banned},
          {"dropped_unmapped", report.dropped_unmapped},
          {"kept", report.kept},
          {"entity_count", report.stats.entity_count},
          {"embedding_dim", report.stats.embedding_dim},
          {"qid_coverage", report.stats.qid_coverage},
          {"bytes_on_disk", report.stats.bytes_on_disk},
      };
      std::cout << out.dump(2) << "\n";
    } else if (index_cmd->parsed()) {
      elkb::KbReader kb(i_kb);
      elkb::LexIndex index = elkb::build_index(kb);
      elkb::save_index(index, i_out);
      json out = {{"doc_count", index.doc_count},
                  {"title_terms", index.title.postings.size()},
                  {"description_terms", index.description.postings.size()},
                  {"analyzer", index.analyzer_tag},
                  {"path", i_out}};
      std::cout << out.dump(2) << "\n";
    } else if (query_cmd->parsed()) {
      elkb::LexIndex index = elkb::load_index(q_index);
      elkb::QuerySpec spec;
      spec.query_text = q_text;
      spec.top_k = q_k;
      spec.match_type = parse_match_type(q_match);
      apply_boosts(q_boosts, &spec.title_boost, &spec.description_boost);
      elkb::CandidateList candidates = elkb::multi_match(index, spec);
      json out = json::array();
      for (const auto& c : candidates)
        out.push_back({{"id", c.entity_id}, {"score", c.score}});
      std::cout << out.dump(2) << "\n";
    } else if (link_cmd->parsed()) {
      auto stack = load_stack(l_kb, l_index, l_encoder, l_alias);
      elkb::Linker linker(stack->deps());
      elkb::LinkerConfig cfg;
      cfg.top_k = l_k;
      cfg.echo_candidates = l_echo;
      cfg.match_type = parse_match_type(l_match);
      apply_boosts(l_boosts, &cfg.title_boost, &cfg.description_boost);
      auto mode = elkb::parse_retrieval_mode(l_mode);
      if (!mode) throw elkb::ValidationError("unknown mode: " + l_mode);
      cfg.mode = *mode;
      elkb::LinkResult result =
          l_spans.empty() ? linker.link_text(l_text, cfg)
                          : linker.link_with_spans(l_text, parse_spans_json(l_spans), cfg);
      std::cout << elkb::link_result_to_json(result).dump(2) << "\n";
    } else if (serve_cmd->parsed()) {
      auto [host, port] = parse_addr(s_addr);
      auto stack = load_stack(s_kb, s_index, s_encoder, s_alias);
      elkb::ServiceConfig cfg;
      cfg.defaults.top_k = s_k;
      auto mode = elkb::parse_retrieval_mode(s_mode);
      if (!mode) throw elkb::ValidationError("unknown mode: " + s_mode);
      cfg.defaults.mode = *mode;
      cfg.max_inflight = s_max_inflight;
      cfg.index_version = std::to_string(elkb::kIndexFormatVersion) + "/" +
                          stack->index.analyzer_tag;
      elkb::Service service(cfg);
      service.set_dependencies(std::make_shared<elkb::Linker>(stack->deps()));
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "elkb: serving on " << host << ":" << port << " ("
                << stack->kb->entity_count() << " entities)\n";
      if (!service.listen(host, port)) {
        g_service = nullptr;
        throw elkb::IoError("cannot bind " + s_addr);
      }
      g_service = nullptr;
    } else if (bench_cmd->parsed()) {
      auto stack = load_stack(be_kb, be_index, be_encoder, "");
      elkb::Linker linker(stack->deps());
      elkb::GoldLoadReport gold_report;
      std::vector<elkb::GoldRow> gold = elkb::load_gold(be_gold, &gold_report);
      if (gold_report.rows_malformed > 0)
        warn(std::to_string(gold_report.rows_malformed) + " malformed gold rows skipped");
      elkb::QidIndex qid_index = elkb::build_qid_index(*stack->kb);
      elkb::LinkerConfig cfg;
      cfg.top_k = be_k;
      auto mode = elkb::parse_retrieval_mode(be_mode);
      if (!mode) throw elkb::ValidationError("unknown mode: " + be_mode);
      cfg.mode = *mode;

      json out;
      elkb::EvalReport base = elkb::evaluate(linker, cfg, gold, qid_index);
      out["evaluate"] = elkb::eval_report_to_json(base);
      std::printf("utterances %zu  accuracy %.4f  recall@%u %.4f  avg %.3f ms  p50 %.3f ms\n",
                  base.utterances, base.accuracy, cfg.top_k, base.recall_at_k,
                  base.avg_latency_ms, base.p50_latency_ms);

      if (!be_sweep.empty()) {
        std::vector<uint32_t> ks;
        size_t pos = 0;
        while (pos <= be_sweep.size()) {
          size_t comma = be_sweep.find(',', pos);
          std::string item = be_sweep.substr(
              pos, comma == std::string::npos ? std::string::npos : comma - pos);
          if (!item.empty()) ks.push_back(static_cast<uint32_t>(std::stoul(item)));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        auto rows = elkb::k_sweep(linker, cfg, gold, qid_index, ks, be_repeat);
        std::cout << elkb::sweep_table(rows);
        out["sweep"] = elkb::sweep_to_json(rows);
      }
      if (be_ablation) {
        auto ab = elkb::ablation(linker, cfg, gold, qid_index);
        std::cout << elkb::ablation_table(ab);
        out["ablation"] = {{"full", elkb::eval_report_to_json(ab.full)},
                           {"mmq_only", elkb::eval_report_to_json(ab.mmq_only)}};
      }
      if (!be_out.empty()) {
        std::ofstream f(be_out, std::ios::trunc);
        if (!f) throw elkb::IoError("cannot write report: " + be_out);
        f << out.dump(2) << "\n";
      }
    } else if (prune_cmd->parsed()) {
      elkb::PruneReport report = elkb::prune_model_artifact(p_in, p_out, p_prefix);
      json out = {{"tensors_kept", report.tensors_kept},
                  {"tensors_removed", report.tensors_removed},
                  {"bytes_before", report.bytes_before},
                  {"bytes_after", report.bytes_after}};
      std::cout << out.dump(2) << "\n";
    } else {
      std::cerr << app.help() << "\n";
      return 1;
    }
  } catch (const elkb::ValidationError& e) {
    report_error("validation", e.what());
    return 1;
  } catch (const elkb::EmptyQueryError& e) {
    report_error("empty_query", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return 2;
  }
  return 0;
}
