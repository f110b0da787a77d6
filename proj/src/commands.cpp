#include "finsage/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "finsage/eval.hpp"
#include "finsage/ingest.hpp"
#include "httplib.h"

namespace finsage {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kClient: return "client";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kEmptyStore: return "empty-store";
    case ErrorCode::kInput: return "input";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kArgument:
      return kExitConfig;
    case ErrorCode::kNotFound:
    case ErrorCode::kFormat:
    case ErrorCode::kIo:
    case ErrorCode::kEmptyStore:
      return kExitStore;
    case ErrorCode::kClient:
      return kExitClient;
    case ErrorCode::kInput:
    case ErrorCode::kParse:
    case ErrorCode::kSchema:
    case ErrorCode::kDomain:
      return kExitInput;
  }
  return kExitInternal;
}

std::string error_json(const std::string& kind, const std::string& message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", exit_code}};
  return j.dump();
}

std::shared_ptr<const ChunkStore> load_store(const EngineConfig& config) {
  if (!std::filesystem::exists(config.store_path)) {
    throw Error(ErrorCode::kNotFound, "store not found: " + config.store_path +
                                          " (run 'finsage index' first)");
  }
  return std::make_shared<const ChunkStore>(ChunkStore::load(config.store_path));
}

nlohmann::ordered_json retrieve_response(const Engine& engine, const std::string& query, std::size_t k) {
  const auto result = engine.run(query, k);
  nlohmann::ordered_json j;
  j["query"] = result.plan.original_query;
  j["sub_queries"] = result.plan.sub_queries;
  j["degraded"] = result.plan.degraded;
  auto subs = nlohmann::ordered_json::array();
  for (const auto& sub : result.sub_results) {
    nlohmann::ordered_json s;
    s["sub_query"] = sub.retrieved.sub_query;
    s["ranked"] = ranked_to_json(sub.reranked, engine.store());
    subs.push_back(std::move(s));
  }
  j["results"] = std::move(subs);
  j["warnings"] = result.warnings();
  return j;
}

std::unique_ptr<httplib::Server> make_query_server(std::shared_ptr<const Engine> engine) {
  auto server = std::make_unique<httplib::Server>();
  server->Get("/healthz", [engine](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json j;
    j["status"] = "ok";
    j["chunks"] = engine->store().size();
    res.set_content(j.dump(), "application/json");
  });
  server->Post("/retrieve", [engine](const httplib::Request& req, httplib::Response& res) {
    auto fail = [&res](int status, const std::string& kind, const std::string& msg) {
      res.status = status;
      nlohmann::ordered_json j;
      j["error"] = {{"kind", kind}, {"message", msg}};
      res.set_content(j.dump(), "application/json");
    };
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      return fail(400, "parse", e.what());
    }
    if (!body.is_object() || !body.contains("query") || !body["query"].is_string()) {
      return fail(400, "input", "body must be an object with a string 'query'");
    }
    std::size_t k = engine->config().rerank.k;
    if (body.contains("k")) {
      if (!body["k"].is_number_integer() || body["k"].get<long long>() < 1) {
        return fail(400, "input", "'k' must be a positive integer");
      }
      k = body["k"].get<std::size_t>();
    }
    try {
      res.set_content(retrieve_response(*engine, body["query"].get<std::string>(), k).dump(),
                      "application/json");
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::kClient        ? 502
                         : e.code() == ErrorCode::kEmptyStore  ? 503
                         : e.code() == ErrorCode::kArgument    ? 400
                                                               : 500;
      fail(status, error_code_name(e.code()), e.what());
    } catch (const std::exception& e) {
      fail(500, "internal", e.what());
    }
  });
  return server;
}

namespace {

std::string read_file(const std::string& path, ErrorCode missing_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing_code, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInput, "cannot read " + path);
  return in;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

std::string default_doc_id(const std::string& path) {
  std::string stem = std::filesystem::path(path).stem().string();
  const std::string suffix = "_content_list";
  if (stem.size() > suffix.size() && stem.ends_with(suffix)) stem.resize(stem.size() - suffix.size());
  return stem;
}

Date parse_date_arg(const std::string& text) {
  auto d = Date::parse(text);
  if (!d) throw Error(ErrorCode::kArgument, "not an ISO-8601 date: " + text);
  return *d;
}

struct Global {
  std::string config_path;
  std::vector<std::string> overrides;

  EngineConfig load() const {
    std::optional<std::filesystem::path> file;
    if (!config_path.empty()) file = config_path;
    return load_config(file, process_env(), overrides);
  }
};

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> doc_ids;
  std::vector<std::string> pub_dates;
  std::string out = "chunks.jsonl";
};

int cmd_ingest(const Global& g, const IngestArgs& a, std::ostream& out) {
  const auto config = g.load();
  if (!a.doc_ids.empty() && a.doc_ids.size() != a.inputs.size()) {
    throw Error(ErrorCode::kArgument, "give one --doc-id per input file");
  }
  if (a.pub_dates.size() > 1 && a.pub_dates.size() != a.inputs.size()) {
    throw Error(ErrorCode::kArgument, "give one --pub-date, or one per input file");
  }
  std::vector<SourceDocument> docs;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    SourceDocument doc;
    doc.document_id = a.doc_ids.empty() ? default_doc_id(a.inputs[i]) : a.doc_ids[i];
    if (!a.pub_dates.empty()) doc.publication_date = parse_date_arg(a.pub_dates[a.pub_dates.size() == 1 ? 0 : i]);
    try {
      doc.blocks = parse_content_list(read_file(a.inputs[i], ErrorCode::kInput));
    } catch (const ParseError& e) {
      throw ParseError(a.inputs[i] + ": " + e.what(), e.offset());
    } catch (const Error& e) {
      throw Error(e.code(), a.inputs[i] + ": " + e.what());
    }
    docs.push_back(std::move(doc));
  }
  IngestOptions options;
  options.tau_dedup = config.thresholds.tau_dedup;
  options.coref_k = config.thresholds.coref_k;
  options.segmentation = {config.thresholds.segment_budget, config.thresholds.segment_unit};
  const auto result = ingest_documents(docs, options, make_clients(config.clients));
  std::ostringstream chunks;
  write_chunks_jsonl(chunks, result.chunks);
  write_text(a.out, chunks.str());
  nlohmann::ordered_json j;
  j["out"] = a.out;
  j["documents"] = docs.size();
  j["segments"] = result.segments.size();
  j["drafts_before_dedup"] = result.drafts_before_dedup;
  j["drafts_after_dedup"] = result.drafts_after_dedup;
  j["chunks"] = result.chunks.size();
  j["warnings"] = result.warnings;
  out << dump(j);
  return kExitOk;
}

struct IndexArgs {
  std::vector<std::string> chunk_files;
  bool fresh = false;
};

int cmd_index(const Global& g, const IndexArgs& a, std::ostream& out) {
  const auto config = g.load();
  ChunkStore store(config.bm25);
  if (!a.fresh && std::filesystem::exists(config.store_path)) {
    store.upsert_chunks(ChunkStore::load(config.store_path).chunks());
  }
  UpsertReport total;
  for (const auto& file : a.chunk_files) {
    auto in = open_input(file);
    std::vector<Chunk> chunks;
    try {
      chunks = read_chunks_jsonl(in);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInput, file + ": " + e.what());
    }
    const auto r = store.upsert_chunks(chunks);
    total.inserted += r.inserted;
    total.replaced += r.replaced;
    total.skipped += r.skipped;
  }
  store.save(config.store_path);
  nlohmann::ordered_json j;
  j["store_path"] = config.store_path;
  j["upsert"] = {{"inserted", total.inserted}, {"replaced", total.replaced}, {"skipped", total.skipped}};
  j["manifest"] = manifest_to_json(store.manifest());
  out << dump(j);
  return kExitOk;
}

Engine make_engine(const EngineConfig& config) {
  return Engine(config, load_store(config), make_clients(config.clients));
}

struct RetrieveArgs {
  std::string query;
  std::vector<std::string> history;
  std::string trace;
};

int cmd_retrieve(const Global& g, const RetrieveArgs& a, std::ostream& out) {
  const auto config = g.load();
  const auto engine = make_engine(config);
  const auto result = engine.run(a.query, std::nullopt, a.history);
  if (!a.trace.empty()) write_text(a.trace, dump(query_result_to_json(result, engine.store())));
  nlohmann::ordered_json j;
  j["query"] = result.plan.original_query;
  j["sub_queries"] = result.plan.sub_queries;
  auto subs = nlohmann::ordered_json::array();
  for (const auto& sub : result.sub_results) {
    nlohmann::ordered_json s;
    s["sub_query"] = sub.retrieved.sub_query;
    s["candidates"] = candidates_to_json(sub.candidates);
    s["bundles"] = bundles_to_json(sub.bundles);
    subs.push_back(std::move(s));
  }
  j["results"] = std::move(subs);
  j["retrieved_chunk_ids"] = result.retrieved_chunk_ids();
  j["warnings"] = result.warnings();
  out << dump(j);
  return kExitOk;
}

struct RerankArgs {
  std::string query;
  std::size_t k = 0;  // 0: configured default
};

int cmd_rerank(const Global& g, const RerankArgs& a, std::ostream& out) {
  const auto config = g.load();
  const auto engine = make_engine(config);
  out << dump(retrieve_response(engine, a.query, a.k ? a.k : config.rerank.k));
  return kExitOk;
}

struct EvalArgs {
  std::string queries;
  std::string mode = "retrieval";
  std::vector<std::size_t> k_list;
  std::string out;
};

int cmd_eval(const Global& g, const EvalArgs& a, std::ostream& out) {
  const auto config = g.load();
  auto in = open_input(a.queries);
  const auto queries = read_eval_queries(in);
  const auto engine = make_engine(config);
  const auto report =
      a.mode == "rerank"
          ? rerank_report_to_json(evaluate_rerank(queries, engine, a.k_list.empty() ? config.eval_k : a.k_list))
          : eval_report_to_json(evaluate_retrieval(queries, engine));
  if (a.out.empty()) {
    out << dump(report);
  } else {
    write_text(a.out, dump(report));
    nlohmann::ordered_json j;
    j["out"] = a.out;
    j["mode"] = a.mode;
    j["queries"] = queries.size();
    out << dump(j);
  }
  return kExitOk;
}

struct PrefsArgs {
  std::string queries;
  std::optional<double> ratio;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_build_prefs(const Global& g, const PrefsArgs& a, std::ostream& out) {
  const auto config = g.load();
  auto in = open_input(a.queries);
  const auto queries = read_eval_queries(in);
  const auto engine = make_engine(config);
  std::vector<std::vector<std::string>> traces;
  for (const auto& q : queries) traces.push_back(engine.run(q.query).retrieved_chunk_ids());
  const auto built = build_preference_dataset(queries, traces, engine.store(),
                                              a.ratio.value_or(config.balance_ratio),
                                              a.seed.value_or(config.seed));
  std::ostringstream jsonl;
  write_preference_jsonl(jsonl, built.pairs);
  if (a.out.empty()) {
    out << jsonl.str();
    return kExitOk;
  }
  write_text(a.out, jsonl.str());
  nlohmann::ordered_json j;
  j["out"] = a.out;
  j["pairs"] = built.pairs.size();
  j["warnings"] = built.warnings;
  out << dump(j);
  return kExitOk;
}

int cmd_dpo_loss(const Global& g, const std::string& prefs, std::ostream& out) {
  const auto config = g.load();
  auto in = open_input(prefs);
  const auto pairs = read_preference_jsonl(in);
  auto scorer = make_cross_encoder(config.clients.cross_encoder);
  const double loss = dpo_loss(pairs, [&scorer](const std::string& q, const std::string& p) {
    const auto logits = scorer->cross_score(q, {p});
    if (logits.size() != 1) throw ClientError("cross-encoder returned no logit", false);
    return sigmoid(logits.front());
  });
  nlohmann::ordered_json j;
  j["pairs"] = pairs.size();
  j["loss"] = loss;
  out << dump(j);
  return kExitOk;
}

struct JudgeArgs {
  std::string queries;
  std::string answers;
  std::string out;
};

int cmd_judge_requests(const Global& g, const JudgeArgs& a, std::ostream& out) {
  const auto config = g.load();
  auto qin = open_input(a.queries);
  const auto queries = read_eval_queries(qin);
  std::map<std::string, std::string> answers;
  auto ain = open_input(a.answers);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ain, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      answers[j.at("query_id").get<std::string>()] = j.at("answer").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInput, "answers line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<JudgeInput> inputs;
  std::optional<Engine> engine;
  for (const auto& q : queries) {
    auto it = answers.find(q.query_id);
    if (it == answers.end()) continue;
    if (!engine) engine.emplace(make_engine(config));
    JudgeInput in{q.query, it->second, q.reference_answer, {}};
    const auto result = engine->run(q.query, config.rerank.k);
    for (const auto& sub : result.sub_results) {
      for (const auto& s : sub.reranked.ranked) in.context.push_back(s.item.text);
    }
    inputs.push_back(std::move(in));
  }
  std::ostringstream jsonl;
  emit_judge_requests(jsonl, inputs);
  if (a.out.empty()) {
    out << jsonl.str();
  } else {
    write_text(a.out, jsonl.str());
    nlohmann::ordered_json j;
    j["out"] = a.out;
    j["records"] = inputs.size();
    out << dump(j);
  }
  return kExitOk;
}

int cmd_serve(const Global& g, const std::string& host, int port, std::ostream& out) {
  const auto config = g.load();
  auto engine = std::make_shared<const Engine>(make_engine(config));
  auto server = make_query_server(engine);
  if (!server->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
  nlohmann::ordered_json j;
  j["listening"] = host + ":" + std::to_string(port);
  j["chunks"] = engine->store().size();
  out << j.dump() << std::endl;
  server->listen_after_bind();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-path retrieval and re-ranking over financial filings", "finsage"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("-c,--config", g.config_path, "JSON config file");
  app.add_option("--set", g.overrides, "Override a config value (dotted.key=value)");

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Turn MinerU content_list.json files into chunks");
  ingest->add_option("inputs", ingest_args.inputs, "content_list.json files")->required();
  ingest->add_option("--doc-id", ingest_args.doc_ids, "Document id per input (default: file stem)");
  ingest->add_option("--pub-date", ingest_args.pub_dates, "Publication date (YYYY-MM-DD), one or per input");
  ingest->add_option("-o,--out", ingest_args.out, "Chunk JSONL output")->capture_default_str();

  IndexArgs index_args;
  auto* index = app.add_subcommand("index", "Upsert chunk files into the store");
  index->add_option("chunks", index_args.chunk_files, "Chunk JSONL files")->required();
  index->add_flag("--fresh", index_args.fresh, "Ignore any existing store");

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "Multi-path retrieval and bundling for a query");
  retrieve->add_option("-q,--query", retrieve_args.query)->required();
  retrieve->add_option("--history", retrieve_args.history, "Earlier conversation turns");
  retrieve->add_option("--trace", retrieve_args.trace, "Write the full retrieval trace here");

  RerankArgs rerank_args;
  auto* rerank = app.add_subcommand("rerank", "Retrieve and return the top-K re-ranked results");
  rerank->add_option("-q,--query", rerank_args.query)->required();
  rerank->add_option("-k,--k", rerank_args.k, "Results per sub-query")->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate against annotated queries");
  eval->add_option("--queries", eval_args.queries)->required();
  eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"retrieval", "rerank"}))->capture_default_str();
  eval->add_option("--k", eval_args.k_list, "K values for rerank mode")->check(CLI::PositiveNumber);
  eval->add_option("-o,--out", eval_args.out, "Write the report here instead of stdout");

  PrefsArgs prefs_args;
  auto* prefs = app.add_subcommand("build-prefs", "Build DPO preference pairs from retrieval runs");
  prefs->add_option("--queries", prefs_args.queries)->required();
  prefs->add_option("--ratio", prefs_args.ratio, "Negatives per positive")->check(CLI::PositiveNumber);
  prefs->add_option("--seed", prefs_args.seed);
  prefs->add_option("-o,--out", prefs_args.out);

  std::string prefs_file;
  auto* loss = app.add_subcommand("dpo-loss", "Mean DPO loss of the configured cross-encoder on pairs");
  loss->add_option("--prefs", prefs_file)->required();

  JudgeArgs judge_args;
  auto* judge = app.add_subcommand("judge-requests", "Emit LLM-judge request records");
  judge->add_option("--queries", judge_args.queries)->required();
  judge->add_option("--answers", judge_args.answers, "JSONL of {query_id, answer}")->required();
  judge->add_option("-o,--out", judge_args.out);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve POST /retrieve and GET /healthz");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(1, 65535))->capture_default_str();

  auto* show_config = app.add_subcommand("config", "Print the resolved configuration");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", e.what(), kExitUsage) << '\n';
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(g, ingest_args, out);
    if (index->parsed()) return cmd_index(g, index_args, out);
    if (retrieve->parsed()) return cmd_retrieve(g, retrieve_args, out);
    if (rerank->parsed()) return cmd_rerank(g, rerank_args, out);
    if (eval->parsed()) return cmd_eval(g, eval_args, out);
    if (prefs->parsed()) return cmd_build_prefs(g, prefs_args, out);
    if (loss->parsed()) return cmd_dpo_loss(g, prefs_file, out);
    if (judge->parsed()) return cmd_judge_requests(g, judge_args, out);
    if (serve->parsed()) return cmd_serve(g, host, port, out);
    if (show_config->parsed()) {
      out << dump(config_to_json(g.load()));
      return kExitOk;
    }
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    err << error_json(error_code_name(e.code()), e.what(), code) << '\n';
    return code;
  } catch (const std::exception& e) {
    err << error_json("internal", e.what(), kExitInternal) << '\n';
    return kExitInternal;
  }
  err << error_json("usage", "no command given", kExitUsage) << '\n';
  return kExitUsage;
}

}  // namespace finsage
