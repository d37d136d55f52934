#include "mkg/cli.hpp"

#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "mkg/config.hpp"
#include "mkg/eval.hpp"
#include "mkg/extraction.hpp"
#include "mkg/synthesis.hpp"
#include "mkg/text.hpp"

namespace mkg::cli {

using nlohmann::json;

ExitCode exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::CacheCorrupt:
    case ErrorCode::InvalidTemplate:
    case ErrorCode::UnknownTemplate:
        return kConfigError;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::RemoteProtocolError:
    case ErrorCode::ScorerUnavailable:
    case ErrorCode::MockScriptExhausted:
        return kBackendUnavailable;
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::EmptyDataset:
    case ErrorCode::DatasetError:
    case ErrorCode::PredictionGoldMismatch:
    case ErrorCode::IncomparableRuns:
        return kDatasetError;
    default:
        return kUsageError;
    }
}

std::filesystem::path stats_path_for(const std::filesystem::path& cache_path) {
    auto p = cache_path;
    p += ".stats.json";
    return p;
}

namespace {

PersistedStats stats_from_json(const std::string& content) {
    PersistedStats s;
    if (content.find_first_not_of(" \t\r\n") == std::string::npos) return s;
    json j = json::parse(content);
    s.hits = j.value("hits", 0ULL);
    s.misses = j.value("misses", 0ULL);
    s.local_samples = j.value("local_samples", 0ULL);
    s.local_total_ms = j.value("local_total_ms", 0.0);
    s.remote_samples = j.value("remote_samples", 0ULL);
    s.remote_total_ms = j.value("remote_total_ms", 0.0);
    return s;
}

} // namespace

PersistedStats read_persisted_stats(const std::filesystem::path& cache_path) {
    std::ifstream in(stats_path_for(cache_path), std::ios::binary);
    if (!in) return {};
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return stats_from_json(content);
    } catch (const json::exception&) {
        return {};
    }
}

void merge_persisted_stats(const std::filesystem::path& cache_path, const RetrievalStats& session) {
    if (session.lookups() == 0 && session.remote_latency_ms.empty()) return;
    const auto path = stats_path_for(cache_path);
    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) return;
    ::flock(fd, LOCK_EX);
    std::string content;
    char buf[4096];
    ssize_t n;
    while ((n = ::read(fd, buf, sizeof buf)) > 0) content.append(buf, static_cast<std::size_t>(n));
    PersistedStats s;
    try {
        s = stats_from_json(content);
    } catch (const json::exception&) {
    }
    s.hits += session.cache_hits;
    s.misses += session.cache_misses;
    s.local_samples += session.local_latency_ms.size();
    for (double v : session.local_latency_ms) s.local_total_ms += v;
    s.remote_samples += session.remote_latency_ms.size();
    for (double v : session.remote_latency_ms) s.remote_total_ms += v;
    std::string out = json{{"hits", s.hits},
                           {"misses", s.misses},
                           {"local_samples", s.local_samples},
                           {"local_total_ms", s.local_total_ms},
                           {"remote_samples", s.remote_samples},
                           {"remote_total_ms", s.remote_total_ms}}
                          .dump(2) +
                      "\n";
    if (::ftruncate(fd, 0) == 0 && ::lseek(fd, 0, SEEK_SET) == 0) {
        [[maybe_unused]] auto w = ::write(fd, out.data(), out.size());
    }
    ::flock(fd, LOCK_UN);
    ::close(fd);
}

namespace {

struct Common {
    std::string config_path = "mkg.toml";
};

Question question_from_flags(const std::string& stem, const std::vector<std::string>& options,
                             const std::string& language) {
    Question q;
    q.id = "cli";
    q.stem = stem;
    q.language = language;
    for (std::size_t i = 0; i < options.size(); ++i) {
        q.options.push_back({static_cast<char>('A' + i), options[i]});
    }
    validate(q);
    return q;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

// Flushes cache statistics when a command finishes, success or not.
struct StatsFlush {
    Engine& engine;
    ~StatsFlush() {
        if (engine.cache) merge_persisted_stats(engine.cache->path(), engine.cache->stats().snapshot());
    }
};

void print_trace(const PipelineTrace& t, std::ostream& out) {
    out << "answer: " << t.answer.choice_string() << "\n";
    out << "path: " << to_string(t.path) << "\n";
    if (!t.entities.empty()) {
        out << "entities:\n";
        for (const auto& e : t.entities) {
            out << "  " << e.surface << " -> " << e.english
                << (e.origin.is_stem() ? std::string(" (stem)") : " (option " + std::string(1, e.origin.label) + ")")
                << "\n";
        }
    }
    out << "statements:\n";
    for (const auto& s : t.statements.statements) out << "  - " << s << "\n";
    for (const auto& n : t.notes) out << "note: " << n << "\n";
    out << "timings (ms):\n";
    for (const auto& timing : t.timings) out << "  " << timing.stage << " " << fixed(timing.ms) << "\n";
}

int cmd_answer(const Config& config, const std::string& stem, const std::vector<std::string>& options,
               const std::string& language, bool no_declarative, bool base, std::ostream& out) {
    Config c = config;
    if (no_declarative) c.declarative = false;
    Engine engine = build_engine(c);
    StatsFlush flush{engine};
    Question q = question_from_flags(stem, options, language);
    PipelineTrace trace = engine.pipeline->run(q, base ? RunMode::Base : RunMode::MkgRank);
    print_trace(trace, out);
    return kSuccess;
}

int cmd_rank(const Config& config, const std::string& stem, const std::vector<std::string>& options,
             const std::string& language, std::ostream& out) {
    Engine engine = build_engine(config);
    StatsFlush flush{engine};
    Question q = question_from_flags(stem, options, language);
    auto entities = translate_entities(extract_entities(q, *engine.llm), q.language);
    auto retrievals = engine.retriever->retrieve(entities);
    for (const auto& r : retrievals) {
        out << "entity " << r.key << ": " << r.graph.triples.size() << " triples"
            << (r.from_cache ? " (cached)" : "") << (r.error ? std::string(" error: ") + r.error->what() : "")
            << "\n";
    }
    auto stage1 = embed_rank(q, graphs_of(retrievals), *engine.embedder, config.ranking.embed_top_k);
    out << "embedding stage (top " << config.ranking.embed_top_k << "):\n";
    for (const auto& s : stage1) out << "  " << fixed(s.embed_score, 6) << "  " << triple_to_text(s.triple) << "\n";
    auto ranked = cross_filter(q, format_options(q), stage1, *engine.cross_scorer, config.ranking.cross_top_k,
                               config.ranking.validity_threshold);
    out << "cross stage (top " << config.ranking.cross_top_k << "):\n";
    for (const auto& s : ranked.items) {
        out << "  " << fixed(*s.cross_score, 6) << "  " << triple_to_text(s.triple) << "\n";
    }
    out << "valid: " << (ranked.valid ? "true" : "false") << "\n";
    return kSuccess;
}

struct EvalFlags {
    std::string dataset;
    std::string format = "jsonl";
    std::string mode = "mkg-rank";
    std::string run_id;
    std::string out_dir = ".";
    std::string compare;
    std::string language;
    std::size_t parallel = 0;
    bool no_declarative = false;
    bool fresh = false;
};

std::filesystem::path resolve_report(const std::string& ref, const std::filesystem::path& out_dir) {
    std::filesystem::path p(ref);
    if (std::filesystem::exists(p)) return p;
    auto candidate = out_dir / (ref + ".report.jsonl");
    if (std::filesystem::exists(candidate)) return candidate;
    throw Error(ErrorCode::DatasetError, "no run report found for '" + ref + "'");
}

int cmd_eval(const Config& config, const EvalFlags& flags, std::ostream& out) {
    auto format = dataset_format_from_string(flags.format);
    RunMode mode = run_mode_from_string(flags.mode);
    Config c = config;
    if (flags.no_declarative) c.declarative = false;
    if (flags.parallel > 0) c.parallel = flags.parallel;

    LoadedDataset data = load_dataset(flags.dataset, format, LoadOptions{flags.language});
    out << "loaded " << data.questions.size() << " questions (mean length " << fixed(data.mean_length_chars, 1)
        << " chars), rejected " << data.rejected.size() << "\n";
    for (const auto& r : data.rejected) out << "  rejected line " << r.line << ": " << r.reason << "\n";

    std::string run_id = flags.run_id;
    if (run_id.empty()) {
        run_id = std::filesystem::path(flags.dataset).stem().string() + "-" + std::string(to_string(mode));
        if (mode == RunMode::MkgRank && !c.declarative) run_id += "-nodecl";
    }
    const std::filesystem::path out_dir = flags.out_dir;
    std::filesystem::create_directories(out_dir);
    const auto checkpoint_path = out_dir / (run_id + ".checkpoint.jsonl");
    if (flags.fresh) std::filesystem::remove(checkpoint_path);

    Engine engine = build_engine(c);
    StatsFlush flush{engine};
    Checkpoint checkpoint(checkpoint_path);
    if (checkpoint.size() > 0) out << "resuming: " << checkpoint.size() << " questions already done\n";

    const Pipeline& pipeline = *engine.pipeline;
    auto predictions = run_predictions(
        data.questions,
        [&](const Question& q) {
            PipelineTrace t = pipeline.run(q, mode);
            return Prediction{q.id, t.answer, std::string(to_string(t.path))};
        },
        c.parallel, &checkpoint);

    EvalRun run = score_run(run_id, mode, predictions, data.questions);
    run.stats = engine.cache->stats().snapshot();
    write_run_reports(run, out_dir);
    {
        const auto& s = run.stats;
        json stats = {{"cache_hits", s.cache_hits},
                      {"cache_misses", s.cache_misses},
                      {"local_median_ms", median(s.local_latency_ms)},
                      {"remote_median_ms", median(s.remote_latency_ms)}};
        std::ofstream(out_dir / (run_id + ".stats.json")) << stats.dump(2) << "\n";
    }
    out << render_summary(run);

    if (!flags.compare.empty()) {
        EvalRun other = load_run_report(resolve_report(flags.compare, out_dir));
        bool current_is_base = run.mode == RunMode::Base && other.mode != RunMode::Base;
        const EvalRun& base = current_is_base ? run : other;
        const EvalRun& enhanced = current_is_base ? other : run;
        DeltaReport delta = compare_runs(base, enhanced);
        std::string text = render_delta(delta);
        std::ofstream(out_dir / (base.run_id + "__vs__" + enhanced.run_id + ".delta.txt")) << text;
        out << text;
    }
    return kSuccess;
}

int cmd_cache_stats(const Config& config, std::ostream& out) {
    KnowledgeCache cache(CacheOptions{config.cache_path, config.cache_ttl});
    PersistedStats s = read_persisted_stats(config.cache_path);
    out << "cache: " << config.cache_path.string() << "\n"
        << "records: " << cache.size() << "\n"
        << "hits: " << s.hits << "\n"
        << "misses: " << s.misses << "\n"
        << "local mean ms: " << fixed(s.local_samples ? s.local_total_ms / static_cast<double>(s.local_samples) : 0.0, 4)
        << "\n"
        << "remote mean ms: "
        << fixed(s.remote_samples ? s.remote_total_ms / static_cast<double>(s.remote_samples) : 0.0, 4) << "\n";
    return kSuccess;
}

int cmd_cache_warm(const Config& config, const std::string& file, std::ostream& out) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::DatasetError, "cannot read entity list " + file);
    std::vector<MedicalEntity> entities;
    std::string line;
    while (std::getline(in, line)) {
        std::string term = text::trim(line);
        if (term.empty() || term.front() == '#') continue;
        entities.push_back({term, term, EntityOrigin::stem()});
    }
    Engine engine = build_engine(config);
    StatsFlush flush{engine};
    auto results = engine.retriever->retrieve(entities);
    int failures = 0;
    for (const auto& r : results) {
        out << r.key << ": " << r.graph.triples.size() << " triples" << (r.from_cache ? " (already cached)" : "");
        if (r.error) {
            ++failures;
            out << " error: " << r.error->what();
        }
        out << "\n";
    }
    out << "records: " << engine.cache->size() << "\n";
    return failures ? kBackendUnavailable : kSuccess;
}

int cmd_cache_refresh(const Config& config, const std::string& key, std::ostream& out) {
    Engine engine = build_engine(config);
    StatsFlush flush{engine};
    KnowledgeGraph g = engine.retriever->refresh(key);
    out << g.entity_key << ": " << g.triples.size() << " triples refreshed\n";
    return kSuccess;
}

int cmd_cache_compact(const Config& config, std::ostream& out) {
    KnowledgeCache cache(CacheOptions{config.cache_path, config.cache_ttl});
    cache.compact();
    out << "compacted " << config.cache_path.string() << ": " << cache.size() << " records\n";
    return kSuccess;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"mkg: knowledge-graph enhanced multilingual medical QA"};
    app.require_subcommand(1);
    Common common;
    app.add_option("-c,--config", common.config_path, "configuration file")->capture_default_str();

    std::string stem, language = "en";
    std::vector<std::string> options;
    bool no_declarative = false, base = false;
    auto* answer_cmd = app.add_subcommand("answer", "answer one question and print the knowledge trace");
    answer_cmd->add_option("-q,--question", stem, "question stem")->required();
    answer_cmd->add_option("-o,--option", options, "option text, repeat in order A, B, C...");
    answer_cmd->add_option("-l,--language", language, "language tag of the question")->capture_default_str();
    answer_cmd->add_flag("--no-declarative", no_declarative, "feed raw triples instead of converted statements");
    answer_cmd->add_flag("--base", base, "zero-shot answer without knowledge");

    auto* rank_cmd = app.add_subcommand("rank", "show both ranking stages for one question");
    rank_cmd->add_option("-q,--question", stem, "question stem")->required();
    rank_cmd->add_option("-o,--option", options, "option text, repeat in order A, B, C...");
    rank_cmd->add_option("-l,--language", language, "language tag of the question")->capture_default_str();

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "run a dataset and write report files");
    eval_cmd->add_option("-d,--dataset", eval_flags.dataset, "dataset file")->required();
    eval_cmd->add_option("-f,--format", eval_flags.format, "jsonl or csv")->capture_default_str();
    eval_cmd->add_option("-m,--mode", eval_flags.mode, "base or mkg-rank")->capture_default_str();
    eval_cmd->add_option("--run-id", eval_flags.run_id, "run identifier (default: <dataset>-<mode>)");
    eval_cmd->add_option("--out", eval_flags.out_dir, "report directory")->capture_default_str();
    eval_cmd->add_option("--compare", eval_flags.compare, "run id or report file to compare against");
    eval_cmd->add_option("--language", eval_flags.language, "language for rows without one");
    eval_cmd->add_option("--parallel", eval_flags.parallel, "concurrent pipelines (default from config)")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_flag("--no-declarative", eval_flags.no_declarative, "ablation: skip declarative conversion");
    eval_cmd->add_flag("--fresh", eval_flags.fresh, "discard the checkpoint and start over");

    auto* cache_cmd = app.add_subcommand("cache", "inspect and maintain the local knowledge cache");
    cache_cmd->require_subcommand(1);
    auto* stats_cmd = cache_cmd->add_subcommand("stats", "record count and hit/miss counters");
    std::string warm_file, refresh_key;
    auto* warm_cmd = cache_cmd->add_subcommand("warm", "prefetch the entities listed in a file");
    warm_cmd->add_option("file", warm_file, "one English term per line")->required();
    auto* refresh_cmd = cache_cmd->add_subcommand("refresh", "refetch one key, ignoring the TTL");
    refresh_cmd->add_option("key", refresh_key, "entity key")->required();
    auto* compact_cmd = cache_cmd->add_subcommand("compact", "rewrite the log with one record per key");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return kUsageError;
    }

    try {
        Config config = load_config(common.config_path);
        if (*answer_cmd) return cmd_answer(config, stem, options, language, no_declarative, base, out);
        if (*rank_cmd) return cmd_rank(config, stem, options, language, out);
        if (*eval_cmd) return cmd_eval(config, eval_flags, out);
        if (*stats_cmd) return cmd_cache_stats(config, out);
        if (*warm_cmd) return cmd_cache_warm(config, warm_file, out);
        if (*refresh_cmd) return cmd_cache_refresh(config, refresh_key, out);
        if (*compact_cmd) return cmd_cache_compact(config, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    return kUsageError;
}

} // namespace mkg::cli
