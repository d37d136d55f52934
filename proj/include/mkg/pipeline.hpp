#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/kg_retrieval.hpp"
#include "mkg/llm_gateway.hpp"
#include "mkg/ranking.hpp"
#include "mkg/self_mining.hpp"

namespace mkg {

enum class RunMode { Base, MkgRank };

std::string_view to_string(RunMode mode);
/// "base" or "mkg-rank" (also "mkg"); throws ConfigError.
RunMode run_mode_from_string(std::string_view s);

/// How the statements fed to the final prompt were obtained.
enum class KnowledgePath { None, Declarative, RawTriples, SelfMining };

std::string_view to_string(KnowledgePath path);

struct PipelineOptions {
    RankingOptions ranking;
    Bm25Params bm25;
    std::size_t chunk_window = 3;
    std::size_t mining_top_n = 3;
    bool declarative = true;  // false: raw triple texts go straight to reasoning
    std::string preferred_language = "English";
};

struct StageTiming {
    std::string stage;
    double ms = 0.0;
};

struct PipelineTrace {
    std::string question_id;
    RunMode mode = RunMode::MkgRank;
    KnowledgePath path = KnowledgePath::None;
    std::vector<MedicalEntity> entities;
    std::vector<EntityRetrieval> retrievals;
    RankedKnowledge ranked;
    StatementSet statements;
    Answer answer;
    std::vector<std::string> notes;
    std::vector<StageTiming> timings;
};

/// One question through extraction, retrieval, ranking, conversion or
/// self-mining, and final reasoning. Every question ends in exactly one of the
/// knowledge paths; only backend outages escape as exceptions.
class Pipeline {
public:
    Pipeline(std::shared_ptr<const LlmGateway> llm, std::shared_ptr<KgRetriever> retriever,
             std::shared_ptr<Embedder> embedder, std::shared_ptr<CrossScorer> cross_scorer,
             PipelineOptions options = {});

    PipelineTrace run(const Question& q, RunMode mode = RunMode::MkgRank) const;

    const PipelineOptions& options() const { return options_; }
    KgRetriever& retriever() const { return *retriever_; }

private:
    StatementSet mine_self_knowledge(const Question& q, PipelineTrace& trace) const;

    std::shared_ptr<const LlmGateway> llm_;
    std::shared_ptr<KgRetriever> retriever_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<CrossScorer> cross_scorer_;
    PipelineOptions options_;
};

} // namespace mkg
