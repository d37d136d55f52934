#include "mkg/pipeline.hpp"

#include <chrono>

#include "mkg/extraction.hpp"
#include "mkg/synthesis.hpp"

namespace mkg {

std::string_view to_string(RunMode mode) { return mode == RunMode::Base ? "base" : "mkg-rank"; }

RunMode run_mode_from_string(std::string_view s) {
    if (s == "base") return RunMode::Base;
    if (s == "mkg-rank" || s == "mkg" || s == "mkgrank") return RunMode::MkgRank;
    throw Error(ErrorCode::ConfigError, "unknown run mode '" + std::string(s) + "'");
}

std::string_view to_string(KnowledgePath path) {
    switch (path) {
    case KnowledgePath::None: return "none";
    case KnowledgePath::Declarative: return "declarative";
    case KnowledgePath::RawTriples: return "raw-triples";
    case KnowledgePath::SelfMining: return "self-mining";
    }
    return "none";
}

namespace {

class StageTimer {
public:
    StageTimer(PipelineTrace& trace, std::string stage)
        : trace_(trace), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start_;
        trace_.timings.push_back({stage_, d.count()});
    }

private:
    PipelineTrace& trace_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

Pipeline::Pipeline(std::shared_ptr<const LlmGateway> llm, std::shared_ptr<KgRetriever> retriever,
                   std::shared_ptr<Embedder> embedder, std::shared_ptr<CrossScorer> cross_scorer,
                   PipelineOptions options)
    : llm_(std::move(llm)),
      retriever_(std::move(retriever)),
      embedder_(std::move(embedder)),
      cross_scorer_(std::move(cross_scorer)),
      options_(std::move(options)) {}

StatementSet Pipeline::mine_self_knowledge(const Question& q, PipelineTrace& trace) const {
    trace.path = KnowledgePath::SelfMining;
    StageTimer timer(trace, "self_mining");
    std::string passage = generate_self_knowledge(q, *llm_, options_.preferred_language);
    auto chunks = chunk_text(passage, options_.chunk_window);
    auto top = bm25_rank(q.stem + "\n" + format_options(q), chunks, options_.bm25, options_.mining_top_n);
    StatementSet s;
    s.language = options_.preferred_language;
    for (auto& c : top) s.statements.push_back(std::move(c.chunk.text));
    return s;
}

PipelineTrace Pipeline::run(const Question& q, RunMode mode) const {
    validate(q);
    PipelineTrace trace;
    trace.question_id = q.id;
    trace.mode = mode;

    if (mode == RunMode::Base) {
        {
            StageTimer timer(trace, "reasoning");
            trace.answer = answer_without_knowledge(q, *llm_);
        }
        return trace;
    }

    {
        StageTimer timer(trace, "extraction");
        try {
            trace.entities = translate_entities(extract_entities(q, *llm_), q.language);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ExtractionParseError && e.code() != ErrorCode::NoUsableEntities) throw;
            trace.notes.push_back(std::string(e.what()));
            trace.entities.clear();
        }
    }

    if (!trace.entities.empty()) {
        {
            StageTimer timer(trace, "retrieval");
            trace.retrievals = retriever_->retrieve(trace.entities);
        }
        std::size_t failed = 0;
        for (const auto& r : trace.retrievals) {
            if (r.error) {
                ++failed;
                trace.notes.push_back("retrieval '" + r.key + "': " + r.error->what());
            }
        }
        if (failed == trace.retrievals.size()) {
            throw *trace.retrievals.front().error;
        }
        StageTimer timer(trace, "ranking");
        auto first_stage = embed_rank(q, graphs_of(trace.retrievals), *embedder_, options_.ranking.embed_top_k);
        trace.ranked = cross_filter(q, format_options(q), std::move(first_stage), *cross_scorer_,
                                    options_.ranking.cross_top_k, options_.ranking.validity_threshold);
    }

    if (trace.ranked.valid) {
        if (options_.declarative) {
            StageTimer timer(trace, "declarative");
            try {
                trace.statements = declarative_convert(q, trace.ranked, options_.preferred_language, *llm_);
                trace.path = KnowledgePath::Declarative;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ConversionEmpty) throw;
                trace.notes.push_back(std::string(e.what()));
                trace.statements = raw_statements(trace.ranked, options_.preferred_language);
                trace.path = KnowledgePath::RawTriples;
            }
        } else {
            trace.statements = raw_statements(trace.ranked, options_.preferred_language);
            trace.path = KnowledgePath::RawTriples;
        }
    } else {
        trace.statements = mine_self_knowledge(q, trace);
    }

    {
        StageTimer timer(trace, "reasoning");
        trace.answer = answer(q, trace.statements, *llm_);
    }
    return trace;
}

} // namespace mkg
