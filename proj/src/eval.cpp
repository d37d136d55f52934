#include "mkg/eval.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mkg/text.hpp"

namespace mkg {

using nlohmann::json;

DatasetFormat dataset_format_from_string(std::string_view s) {
    if (s == "jsonl") return DatasetFormat::Jsonl;
    if (s == "csv") return DatasetFormat::Csv;
    throw Error(ErrorCode::UnsupportedFormat, "unsupported dataset format '" + std::string(s) + "'");
}

namespace {

using Row = std::map<std::string, std::string>;

struct RawRow {
    std::size_t line;
    Row fields;
};

std::string json_field(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_null()) return {};
    return v.dump();
}

void read_jsonl(std::string_view content, std::vector<RawRow>& rows, std::vector<RejectedRow>& rejected) {
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            if (!j.is_object()) throw std::invalid_argument("row is not a JSON object");
            RawRow r{line_no, {}};
            for (auto it = j.begin(); it != j.end(); ++it) r.fields[it.key()] = json_field(it.value());
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            rejected.push_back({line_no, std::string("unparseable row: ") + e.what()});
        }
    }
}

// RFC 4180: quoted fields may hold commas, doubled quotes and newlines.
void read_csv(std::string_view content, std::vector<RawRow>& rows, std::vector<RejectedRow>& rejected) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    std::size_t line = 1;
    std::size_t record_line = 1;
    auto end_record = [&] {
        if (any || !field.empty() || !fields.empty()) {
            fields.push_back(std::move(field));
            records.emplace_back(record_line, std::move(fields));
        }
        fields.clear();
        field.clear();
        any = false;
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (quoted) {
            if (c == '"' && i + 1 < content.size() && content[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            end_record();
            record_line = ++line;
        } else if (c != '\r') {
            field.push_back(c);
            any = true;
        }
    }
    end_record();
    if (records.empty()) return;

    std::vector<std::string> header;
    for (auto& h : records.front().second) header.push_back(text::trim(h));
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& [line_no, values] = records[r];
        if (values.size() == 1 && text::trim(values[0]).empty()) continue;
        if (values.size() != header.size()) {
            rejected.push_back({line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                             std::to_string(values.size())});
            continue;
        }
        RawRow row{line_no, {}};
        for (std::size_t i = 0; i < header.size(); ++i) row.fields[header[i]] = values[i];
        rows.push_back(std::move(row));
    }
}

std::optional<char> parse_gold(const std::string& raw, std::size_t option_count) {
    std::string v = text::trim(raw);
    if (v.empty()) return std::nullopt;
    if (v.size() == 1 && std::isalpha(static_cast<unsigned char>(v[0]))) {
        return static_cast<char>(std::toupper(static_cast<unsigned char>(v[0])));
    }
    if (std::all_of(v.begin(), v.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        std::size_t idx = std::stoul(v);
        if (idx < option_count) return static_cast<char>('A' + idx);
    }
    return std::nullopt;
}

Question to_question(const RawRow& row, const LoadOptions& options) {
    auto get = [&](const char* key) -> std::string {
        auto it = row.fields.find(key);
        return it == row.fields.end() ? std::string() : text::trim(it->second);
    };
    Question q;
    q.id = get("id");
    if (q.id.empty()) q.id = "line-" + std::to_string(row.line);
    q.stem = get("question");
    if (q.stem.empty()) throw std::invalid_argument("missing question text");
    for (char label = 'A'; label <= 'Z'; ++label) {
        std::string text = get(std::string(1, label).c_str());
        if (text.empty()) break;
        q.options.push_back({label, std::move(text)});
    }
    for (char label = static_cast<char>('A' + q.options.size()); label <= 'Z'; ++label) {
        if (!get(std::string(1, label).c_str()).empty()) {
            throw std::invalid_argument(std::string("option ") + label + " present after a missing option");
        }
    }
    if (q.options.empty()) throw std::invalid_argument("no options");
    std::string gold = get("answer");
    if (gold.empty()) throw std::invalid_argument("missing gold label");
    q.gold = parse_gold(gold, q.options.size());
    if (!q.gold) throw std::invalid_argument("unreadable gold label '" + gold + "'");
    q.language = get("language");
    if (q.language.empty()) q.language = options.default_language;
    if (q.language.empty()) throw std::invalid_argument("missing language");
    validate(q);
    return q;
}

} // namespace

LoadedDataset parse_dataset(std::string_view content, DatasetFormat format, const LoadOptions& options) {
    std::vector<RawRow> rows;
    LoadedDataset out;
    if (format == DatasetFormat::Jsonl) {
        read_jsonl(content, rows, out.rejected);
    } else {
        read_csv(content, rows, out.rejected);
    }
    std::set<std::string> ids;
    double total_length = 0.0;
    for (const auto& row : rows) {
        try {
            Question q = to_question(row, options);
            if (!ids.insert(q.id).second) throw std::invalid_argument("duplicate id '" + q.id + "'");
            std::size_t len = text::codepoint_count(q.stem);
            for (const auto& o : q.options) len += text::codepoint_count(o.text);
            total_length += static_cast<double>(len);
            out.questions.push_back(std::move(q));
        } catch (const std::exception& e) {
            out.rejected.push_back({row.line, e.what()});
        }
    }
    std::sort(out.rejected.begin(), out.rejected.end(),
              [](const RejectedRow& a, const RejectedRow& b) { return a.line < b.line; });
    if (out.questions.empty()) {
        throw Error(ErrorCode::EmptyDataset, "dataset has no valid rows");
    }
    out.mean_length_chars = total_length / static_cast<double>(out.questions.size());
    return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::DatasetError, "cannot read dataset " + path.string());
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_dataset(content, format, options);
}

EvalRun score_run(std::string run_id, RunMode mode, const std::vector<Prediction>& predictions,
                  const std::vector<Question>& gold) {
    if (gold.empty()) throw Error(ErrorCode::EmptyDataset, "cannot score an empty question set");
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) {
        if (!by_id.emplace(p.question_id, &p).second) {
            throw Error(ErrorCode::PredictionGoldMismatch, "duplicate prediction for '" + p.question_id + "'");
        }
    }
    if (by_id.size() != gold.size()) {
        throw Error(ErrorCode::PredictionGoldMismatch,
                    std::to_string(predictions.size()) + " predictions for " + std::to_string(gold.size()) +
                        " questions");
    }
    EvalRun run;
    run.run_id = std::move(run_id);
    run.mode = mode;
    for (const auto& q : gold) {
        auto it = by_id.find(q.id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::PredictionGoldMismatch, "no prediction for '" + q.id + "'");
        }
        if (!q.gold) throw Error(ErrorCode::PredictionGoldMismatch, "question '" + q.id + "' has no gold label");
        QuestionOutcome o{q.id, it->second->answer, *q.gold, false, it->second->path};
        o.correct = o.predicted.label && *o.predicted.label == o.gold;
        run.correct_count += o.correct ? 1 : 0;
        run.outcomes.push_back(std::move(o));
    }
    run.accuracy = static_cast<double>(run.correct_count) / static_cast<double>(run.outcomes.size());
    return run;
}

DeltaReport compare_runs(const EvalRun& base, const EvalRun& enhanced) {
    std::map<std::string, const QuestionOutcome*> base_by_id;
    for (const auto& o : base.outcomes) base_by_id[o.question_id] = &o;
    std::set<std::string> enhanced_ids;
    for (const auto& o : enhanced.outcomes) enhanced_ids.insert(o.question_id);
    if (base_by_id.size() != enhanced_ids.size() ||
        !std::all_of(enhanced_ids.begin(), enhanced_ids.end(), [&](const auto& id) { return base_by_id.count(id); })) {
        throw Error(ErrorCode::IncomparableRuns,
                    "runs '" + base.run_id + "' and '" + enhanced.run_id + "' cover different questions");
    }
    DeltaReport d;
    d.base_run = base.run_id;
    d.enhanced_run = enhanced.run_id;
    d.base_accuracy = base.accuracy;
    d.enhanced_accuracy = enhanced.accuracy;
    d.delta_points = (enhanced.accuracy - base.accuracy) * 100.0;
    for (const auto& e : enhanced.outcomes) {
        const QuestionOutcome& b = *base_by_id.at(e.question_id);
        if (b.correct == e.correct) continue;
        Flip f{e.question_id, e.gold, b.predicted.choice_string(), e.predicted.choice_string()};
        (e.correct ? d.gained : d.lost).push_back(std::move(f));
    }
    return d;
}

std::string format_points(double points) {
    char buf[32];
    // keep "-0.00" from appearing for tiny negative drift
    if (std::abs(points) < 0.005) points = 0.0;
    std::snprintf(buf, sizeof buf, "%+.2f", points);
    return buf;
}

namespace {
std::string percent(double accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", accuracy * 100.0);
    return buf;
}
} // namespace

std::string render_summary(const EvalRun& run) {
    std::ostringstream out;
    out << "run:       " << run.run_id << "\n"
        << "mode:      " << to_string(run.mode) << "\n"
        << "questions: " << run.outcomes.size() << "\n"
        << "correct:   " << run.correct_count << "\n"
        << "accuracy:  " << percent(run.accuracy) << "\n";
    std::map<std::string, std::size_t> paths;
    for (const auto& o : run.outcomes) ++paths[o.path.empty() ? "none" : o.path];
    for (const auto& [path, n] : paths) out << "path " << path << ": " << n << "\n";
    return out.str();
}

std::string render_report_jsonl(const EvalRun& run) {
    std::string out;
    for (const auto& o : run.outcomes) {
        json j = {{"id", o.question_id},
                  {"mode", std::string(to_string(run.mode))},
                  {"gold", std::string(1, o.gold)},
                  {"prediction", o.predicted.choice_string()},
                  {"correct", o.correct},
                  {"path", o.path},
                  {"raw", o.predicted.raw}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string render_delta(const DeltaReport& d) {
    std::ostringstream out;
    out << "base:      " << d.base_run << "  " << percent(d.base_accuracy) << "\n"
        << "enhanced:  " << d.enhanced_run << "  " << percent(d.enhanced_accuracy) << "\n"
        << "delta:     " << format_points(d.delta_points) << " points\n"
        << "gained (base wrong -> enhanced right): " << d.gained.size() << "\n";
    for (const auto& f : d.gained) {
        out << "  " << f.question_id << "  gold " << f.gold << "  " << f.base_choice << " -> " << f.enhanced_choice
            << "\n";
    }
    out << "lost (base right -> enhanced wrong): " << d.lost.size() << "\n";
    for (const auto& f : d.lost) {
        out << "  " << f.question_id << "  gold " << f.gold << "  " << f.base_choice << " -> " << f.enhanced_choice
            << "\n";
    }
    return out.str();
}

namespace {
void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::DatasetError, "cannot write " + path.string());
}
} // namespace

void write_run_reports(const EvalRun& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / (run.run_id + ".report.jsonl"), render_report_jsonl(run));
    write_file(dir / (run.run_id + ".summary.txt"), render_summary(run));
}

EvalRun load_run_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::DatasetError, "cannot read run report " + path.string());
    EvalRun run;
    std::string name = path.filename().string();
    const std::string suffix = ".report.jsonl";
    run.run_id = name.size() > suffix.size() && name.ends_with(suffix) ? name.substr(0, name.size() - suffix.size())
                                                                        : name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            QuestionOutcome o;
            o.question_id = j.at("id").get<std::string>();
            o.gold = j.at("gold").get<std::string>().at(0);
            std::string pred = j.at("prediction").get<std::string>();
            if (pred.size() == 1) o.predicted.label = pred[0];
            o.predicted.raw = j.value("raw", "");
            o.correct = j.at("correct").get<bool>();
            o.path = j.value("path", "");
            run.mode = run_mode_from_string(j.value("mode", "mkg-rank"));
            run.correct_count += o.correct ? 1 : 0;
            run.outcomes.push_back(std::move(o));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::DatasetError,
                        path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (run.outcomes.empty()) throw Error(ErrorCode::EmptyDataset, path.string() + " has no outcomes");
    run.accuracy = static_cast<double>(run.correct_count) / static_cast<double>(run.outcomes.size());
    return run;
}

// --- checkpointing and parallel driver ------------------------------------

Checkpoint::Checkpoint(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            Prediction p;
            p.question_id = j.at("id").get<std::string>();
            std::string choice = j.at("choice").get<std::string>();
            if (choice.size() == 1) p.answer.label = choice[0];
            p.answer.raw = j.value("raw", "");
            p.path = j.value("path", "");
            done_[p.question_id] = std::move(p);
        } catch (const json::exception&) {
            // a torn trailing record from an interrupted run; that question reruns
        }
    }
}

std::optional<Prediction> Checkpoint::find(const std::string& question_id) const {
    std::lock_guard lock(mu_);
    auto it = done_.find(question_id);
    if (it == done_.end()) return std::nullopt;
    return it->second;
}

void Checkpoint::append(const Prediction& p) {
    json j = {{"id", p.question_id}, {"choice", p.answer.choice_string()}, {"raw", p.answer.raw}, {"path", p.path}};
    std::lock_guard lock(mu_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << j.dump() << '\n';
    out.flush();
    done_[p.question_id] = p;
}

std::size_t Checkpoint::size() const {
    std::lock_guard lock(mu_);
    return done_.size();
}

std::vector<Prediction> run_predictions(const std::vector<Question>& questions, const QuestionRunner& runner,
                                        std::size_t parallel, Checkpoint* checkpoint) {
    std::vector<std::optional<Prediction>> results(questions.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        if (checkpoint) results[i] = checkpoint->find(questions[i].id);
        if (!results[i]) todo.push_back(i);
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            {
                std::lock_guard lock(error_mu);
                if (first_error) return;
            }
            std::size_t slot = next.fetch_add(1);
            if (slot >= todo.size()) return;
            std::size_t i = todo[slot];
            try {
                Prediction p = runner(questions[i]);
                p.question_id = questions[i].id;
                if (checkpoint) checkpoint->append(p);
                results[i] = std::move(p);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::size_t workers = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(todo.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    std::vector<Prediction> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

} // namespace mkg
