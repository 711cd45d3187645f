// topicdraw: command-line entry point for every pipeline stage.
//
// Exit codes: 0 success, 1 I/O or configuration error, 2 domain error
// (unknown word, empty result where one is not allowed).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "topicdraw/condenser.hpp"
#include "topicdraw/corpus.hpp"
#include "topicdraw/diachron.hpp"
#include "topicdraw/pipeline.hpp"
#include "topicdraw/service.hpp"
#include "topicdraw/similarity.hpp"
#include "topicdraw/topics.hpp"
#include "topicdraw/window_stats.hpp"

namespace td = topicdraw;

namespace {

struct Logger {
  bool quiet = false;
  bool json = false;

  void operator()(const std::string& level, const std::string& msg) const {
    if (quiet && level == "info") return;
    if (json)
      std::cerr << nlohmann::json{{"level", level}, {"msg", msg}}.dump() << "\n";
    else
      std::cerr << "[" << level << "] " << msg << "\n";
  }
};

struct Global {
  unsigned threads = 0;
  bool quiet = false;
  bool json_logs = false;
  Logger log() const { return {quiet, json_logs}; }
};

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out)
    td::write_text(*out, text);
  else
    std::cout << text;
}

std::optional<td::YearRange> range_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return td::parse_year_range(s);
}

struct CorpusArgs {
  std::string corpus;
  std::string manifest;

  void add(CLI::App* cmd) {
    cmd->add_option("--corpus", corpus, "Corpus directory or year file")->envname("TOPICDRAW_CORPUS")->required();
    cmd->add_option("--manifest", manifest, "JSON manifest mapping years to files");
  }

  td::CorpusHandle load(unsigned threads) const {
    std::optional<td::fs::path> m;
    if (!manifest.empty()) m = manifest;
    return td::ingest(corpus, {m, threads});
  }
};

struct SimilarArgs {
  std::string central;
  std::size_t k = 300;
  std::size_t min_freq = 5;
  std::string years;
  std::string thresholds;
  std::vector<std::string> pos;

  void add(CLI::App* cmd, bool central_required) {
    auto* c = cmd->add_option("--central", central, "Central word");
    if (central_required) c->required();
    cmd->add_option("-k", k, "Number of similar words")->capture_default_str();
    cmd->add_option("--min-freq", min_freq, "Minimum in-scope frequency of a candidate")->capture_default_str();
    cmd->add_option("--years", years, "Year range A..B (default: all years)");
    cmd->add_option("--thresholds", thresholds, "Threshold table JSON");
    cmd->add_option("--pos", pos, "Restrict candidates to POS classes (noun, verb, adjective, adverb, default)");
  }

  td::ThresholdTable table() const {
    return thresholds.empty() ? td::ThresholdTable::standard() : td::load_thresholds(thresholds);
  }

  td::SimilarWordSet run(const td::Corpus& corpus, unsigned threads) const {
    if (!corpus.vocabulary().contains(central)) throw td::UnknownWord(central);
    const auto scope = td::resolve_scope(corpus, range_opt(years));
    const auto store = td::build_counts(corpus, table(), scope, {threads, {}});
    td::SimilarOptions opts{k, min_freq, std::nullopt, threads};
    if (!pos.empty()) {
      std::set<td::PosClass> classes;
      for (const auto& p : pos) classes.insert(td::parse_pos_class(p));
      opts.pos_classes = classes;
    }
    return td::top_k_similar(corpus.vocabulary(), store, central, opts);
  }
};

struct LdaArgs {
  std::size_t k = 20;
  std::optional<double> alpha;
  double beta = 0.01;
  std::size_t iters = 1000;
  std::optional<std::size_t> burn_in;
  std::uint64_t seed = 0;
  std::size_t min_doc_len = 1;
  std::string stopwords;
  bool no_stopwords = false;
  bool summary = false;

  void add(CLI::App* cmd, const std::string& topics_flag = "--k") {
    cmd->add_option(topics_flag, k, "Number of topics")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Document-topic prior (default 50/k)");
    cmd->add_option("--beta", beta, "Topic-word prior")->capture_default_str();
    cmd->add_option("--iters", iters, "Gibbs sweeps")->capture_default_str();
    cmd->add_option("--burn-in", burn_in, "Burn-in sweeps (default min(200, iters/5))");
    cmd->add_option("--seed", seed, "Random seed")->required();
    cmd->add_option("--min-doc-len", min_doc_len, "Drop shorter documents after stopword removal")
        ->capture_default_str();
    cmd->add_option("--stopwords", stopwords, "Stopword list (default: bundled list)");
    cmd->add_flag("--no-stopwords", no_stopwords, "Keep stopwords");
    cmd->add_flag("--summary", summary, "Add a prevalence-weighted word ranking");
  }

  td::LdaConfig config() const {
    td::LdaConfig c;
    c.topics = k;
    c.alpha = alpha;
    c.beta = beta;
    c.iterations = iters;
    c.burn_in = burn_in ? *burn_in : std::min<std::size_t>(200, iters / 5);
    c.seed = seed;
    c.min_doc_len = min_doc_len;
    c.validate();
    return c;
  }

  std::optional<td::fs::path> stopword_path() const {
    if (stopwords.empty()) return std::nullopt;
    return td::fs::path(stopwords);
  }
};

int exit_code_for(const std::exception& e) {
  if (const auto* stage = dynamic_cast<const td::StageError*>(&e)) return stage->domain() ? 2 : 1;
  if (dynamic_cast<const td::DomainError*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Draw the topics around a central word from a POS-tagged diachronic corpus"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_flag("--quiet", g.quiet, "Only report warnings and errors");
  app.add_flag("--json-logs", g.json_logs, "Log as JSON lines on stderr");

  // ingest-check
  auto* check = app.add_subcommand("ingest-check", "Parse a corpus and print its statistics");
  CorpusArgs check_corpus;
  check_corpus.add(check);

  // similar
  auto* similar = app.add_subcommand("similar", "Top-k similar words of a central word");
  CorpusArgs similar_corpus;
  SimilarArgs similar_args;
  std::string similar_out;
  similar_corpus.add(similar);
  similar_args.add(similar, true);
  similar->add_option("--out", similar_out, "Output JSON file (default: stdout)");

  // condense
  auto* cond = app.add_subcommand("condense", "Extract the lines mentioning the central word or its neighbors");
  CorpusArgs cond_corpus;
  SimilarArgs cond_args;
  std::string match_file, format = "tagged", cond_out;
  cond_corpus.add(cond);
  cond_args.add(cond, true);
  cond->add_option("--match-file", match_file, "Similar-word JSON to use instead of recomputing");
  cond->add_option("--format", format, "tagged or plain")->capture_default_str();
  cond->add_option("--out", cond_out, "Output directory")->required();

  // topics
  auto* topics = app.add_subcommand("topics", "Train LDA on a (condensed) corpus directory");
  std::string topics_in, topics_out;
  LdaArgs lda;
  topics->add_option("--in", topics_in, "Corpus directory, usually condense output")->required();
  lda.add(topics);
  topics->add_option("--out", topics_out, "model.json path")->required();

  // series
  auto* series = app.add_subcommand("series", "Per-year word statistics");
  series->require_subcommand(1);
  auto* freq = series->add_subcommand("freq", "Relative frequency per year");
  CorpusArgs freq_corpus;
  std::string freq_word, freq_years, freq_out;
  freq_corpus.add(freq);
  freq->add_option("--word", freq_word, "Word")->required();
  freq->add_option("--years", freq_years, "Year range A..B (default: all)");
  freq->add_option("--out", freq_out, "Output JSON (default: stdout)");
  auto* sim = series->add_subcommand("sim", "Similarity of a word's context vector across years");
  CorpusArgs sim_corpus;
  std::string sim_word, sim_years, sim_out, sim_mode = "base", sim_thresholds;
  td::Year sim_base = 0;
  sim_corpus.add(sim);
  sim->add_option("--word", sim_word, "Word")->required();
  sim->add_option("--base", sim_base, "Base year")->required();
  sim->add_option("--years", sim_years, "Year range A..B (default: all)");
  sim->add_option("--mode", sim_mode, "base or adjacent")->capture_default_str();
  sim->add_option("--thresholds", sim_thresholds, "Threshold table JSON");
  sim->add_option("--out", sim_out, "Output JSON (default: stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_corpus, bind = "127.0.0.1:8080", cache_dir, static_dir, serve_stop;
  std::size_t cache_cap = 8;
  serve->add_option("--corpus", serve_corpus, "Corpus directory")->envname("TOPICDRAW_CORPUS")->required();
  serve->add_option("--bind", bind, "host:port")->capture_default_str();
  serve->add_option("--cache-dir", cache_dir, "Persist count stores here");
  serve->add_option("--cache-cap", cache_cap, "Count stores kept in memory")->capture_default_str();
  serve->add_option("--static", static_dir, "Directory of UI assets served at /");
  serve->add_option("--stopwords", serve_stop, "Stopword list for topic jobs");

  // draw
  auto* drawcmd = app.add_subcommand("draw", "similar -> condense -> topics for one central word");
  CorpusArgs draw_corpus;
  SimilarArgs draw_args;
  LdaArgs draw_lda;
  std::string draw_out, draw_format = "tagged";
  bool dry_run = false;
  draw_corpus.add(drawcmd);
  draw_args.add(drawcmd, true);
  draw_lda.add(drawcmd, "--topics");
  drawcmd->add_option("--format", draw_format, "tagged or plain")->capture_default_str();
  drawcmd->add_option("--out", draw_out, "Run directory")->required();
  drawcmd->add_flag("--dry-run", dry_run, "Print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto log = g.log();
  const unsigned threads = td::resolve_threads(g.threads);
  try {
    if (*check) {
      const auto corpus = check_corpus.load(threads);
      std::cout << td::json_text(td::corpus_summary_json(*corpus));
      if (corpus->total().warnings > 0)
        log("warn", std::to_string(corpus->total().warnings) + " malformed tokens kept with pos 'x'");
    } else if (*similar) {
      const auto corpus = similar_corpus.load(threads);
      const auto set = similar_args.run(*corpus, threads);
      emit(similar_out.empty() ? std::nullopt : std::optional(similar_out), td::json_text(td::to_json(set)));
      log("info", std::to_string(set.neighbors.size()) + " neighbors of " + set.central);
    } else if (*cond) {
      const auto corpus = cond_corpus.load(threads);
      td::SimilarWordSet set;
      if (!match_file.empty()) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(td::read_file(match_file));
        } catch (const nlohmann::json::exception& e) {
          throw td::ConfigError("malformed match file: " + std::string(e.what()));
        }
        set = td::similar_set_from_json(j, corpus->vocabulary());
        set.central = cond_args.central;
      } else {
        set = cond_args.run(*corpus, threads);
      }
      const auto scope = td::resolve_scope(*corpus, range_opt(cond_args.years));
      const auto condensed = td::condense(*corpus, td::make_match_set(set), scope, threads);
      td::export_directory(condensed, *corpus, cond_out, td::parse_export_format(format));
      log("info", std::to_string(condensed.total.lines_kept) + "/" +
                      std::to_string(condensed.total.lines_scanned) + " lines kept");
    } else if (*topics) {
      const auto cfg = lda.config();
      const auto corpus = td::ingest(topics_in, {std::nullopt, threads});
      const auto stop = td::resolve_stopwords(lda.stopword_path(), lda.no_stopwords);
      const auto model = td::train_lda(*corpus, td::all_documents(*corpus), stop, cfg);
      td::write_text(topics_out, td::model_json(model, lda.summary));
      log("info", "trained " + std::to_string(model.topics) + " topics on " +
                      std::to_string(model.doc_count()) + " documents");
    } else if (*freq) {
      const auto corpus = freq_corpus.load(threads);
      const auto range = freq_years.empty()
                             ? td::YearRange{corpus->years().front(), corpus->years().back()}
                             : td::parse_year_range(freq_years);
      const auto s = td::frequency_series(freq_word, *corpus, range);
      emit(freq_out.empty() ? std::nullopt : std::optional(freq_out), td::json_text(td::to_json(s)));
    } else if (*sim) {
      const auto corpus = sim_corpus.load(threads);
      const auto range = sim_years.empty()
                             ? td::YearRange{corpus->years().front(), corpus->years().back()}
                             : td::parse_year_range(sim_years);
      const auto table = sim_thresholds.empty() ? td::ThresholdTable::standard() : td::load_thresholds(sim_thresholds);
      const auto s = td::similarity_series(sim_word, *corpus, sim_base, range, table,
                                           {td::parse_variation_mode(sim_mode), threads});
      emit(sim_out.empty() ? std::nullopt : std::optional(sim_out), td::json_text(td::to_json(s)));
    } else if (*serve) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw td::ConfigError("--bind must be host:port");
      const std::string host = bind.substr(0, colon);
      const int port = std::stoi(bind.substr(colon + 1));
      td::ServiceConfig cfg;
      if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
      cfg.cache_cap = cache_cap;
      if (!static_dir.empty()) cfg.static_dir = static_dir;
      if (!serve_stop.empty()) cfg.stopwords = serve_stop;
      cfg.threads = threads;
      td::serve(serve_corpus, host, port, cfg, [&](httplib::Server&) { log("info", "listening on " + bind); });
    } else if (*drawcmd) {
      td::PipelineConfig cfg;
      cfg.corpus = draw_corpus.corpus;
      if (!draw_corpus.manifest.empty()) cfg.manifest = draw_corpus.manifest;
      if (!draw_args.thresholds.empty()) cfg.thresholds = draw_args.thresholds;
      cfg.k = draw_args.k;
      cfg.min_frequency = draw_args.min_freq;
      cfg.stopwords = draw_lda.stopword_path();
      cfg.no_stopwords = draw_lda.no_stopwords;
      cfg.lda = draw_lda.config();
      cfg.years = range_opt(draw_args.years);
      cfg.out = draw_out;
      cfg.format = td::parse_export_format(draw_format);
      cfg.summary = true;
      cfg.threads = threads;
      if (dry_run) {
        auto j = td::to_json(cfg);
        j["central"] = draw_args.central;
        std::cout << td::json_text(j);
        return 0;
      }
      td::draw(cfg, draw_args.central, [&](const std::string& stage, const std::string& msg) {
        log("info", stage + ": " + msg);
      });
      log("info", "wrote " + cfg.out.string());
    }
  } catch (const std::exception& e) {
    log("error", e.what());
    return exit_code_for(e);
  }
  return 0;
}
