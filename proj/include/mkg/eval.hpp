#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/kg_retrieval.hpp"
#include "mkg/pipeline.hpp"

namespace mkg {

enum class DatasetFormat { Jsonl, Csv };

/// "jsonl" or "csv"; throws UnsupportedFormat.
DatasetFormat dataset_format_from_string(std::string_view s);

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

struct LoadedDataset {
    std::vector<Question> questions;
    std::vector<RejectedRow> rejected;
    /// Mean code-point length of stem plus option texts.
    double mean_length_chars = 0.0;
};

struct LoadOptions {
    std::string default_language;  // used when a row has no language field
};

/// Rows with fields id, question, A, B, C, D (E... optional), answer, language.
/// A numeric answer is a 0-based option index. Bad rows are skipped and
/// listed in `rejected`; EmptyDataset when no row survives.
LoadedDataset parse_dataset(std::string_view content, DatasetFormat format, const LoadOptions& options = {});
LoadedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                           const LoadOptions& options = {});

struct Prediction {
    std::string question_id;
    Answer answer;
    std::string path;  // knowledge path label; informational
};

struct QuestionOutcome {
    std::string question_id;
    Answer predicted;
    char gold = 0;
    bool correct = false;
    std::string path;
};

struct EvalRun {
    std::string run_id;
    RunMode mode = RunMode::MkgRank;
    std::vector<QuestionOutcome> outcomes;  // gold order
    std::size_t correct_count = 0;
    double accuracy = 0.0;
    RetrievalStats stats;
};

/// Correct iff the prediction is the gold label; Uncertain never is. Throws
/// PredictionGoldMismatch unless predictions and gold cover the same ids once
/// each, and EmptyDataset for zero questions.
EvalRun score_run(std::string run_id, RunMode mode, const std::vector<Prediction>& predictions,
                  const std::vector<Question>& gold);

struct Flip {
    std::string question_id;
    char gold = 0;
    std::string base_choice;
    std::string enhanced_choice;
};

struct DeltaReport {
    std::string base_run;
    std::string enhanced_run;
    double base_accuracy = 0.0;
    double enhanced_accuracy = 0.0;
    double delta_points = 0.0;  // percentage points, enhanced minus base
    std::vector<Flip> gained;   // base wrong, enhanced right
    std::vector<Flip> lost;     // base right, enhanced wrong
};

/// Throws IncomparableRuns unless both runs cover the same question ids.
DeltaReport compare_runs(const EvalRun& base, const EvalRun& enhanced);

/// "+35.03", "-2.94", "+0.00"
std::string format_points(double points);

std::string render_summary(const EvalRun& run);
std::string render_report_jsonl(const EvalRun& run);
std::string render_delta(const DeltaReport& delta);

/// Writes `<run_id>.report.jsonl` and `<run_id>.summary.txt` into `dir`.
void write_run_reports(const EvalRun& run, const std::filesystem::path& dir);

/// Rebuilds an EvalRun from a `.report.jsonl` file.
EvalRun load_run_report(const std::filesystem::path& path);

using QuestionRunner = std::function<Prediction(const Question&)>;

/// Append-only per-question outcome log so interrupted runs can resume.
class Checkpoint {
public:
    explicit Checkpoint(std::filesystem::path path);

    std::optional<Prediction> find(const std::string& question_id) const;
    void append(const Prediction& p);
    std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::map<std::string, Prediction> done_;
};

/// Runs `runner` over questions not already in the checkpoint with at most
/// `parallel` concurrent calls, returning predictions in question order.
std::vector<Prediction> run_predictions(const std::vector<Question>& questions, const QuestionRunner& runner,
                                        std::size_t parallel, Checkpoint* checkpoint = nullptr);

} // namespace mkg
