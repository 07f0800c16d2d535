#include "judgekit/jsonl.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace judgekit::jsonl {

using nlohmann::json;

namespace {

json judgement_to_json(const Judgement& judgement) {
    return std::visit(
        [](const auto& j) -> json {
            using J = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<J, Score>) {
                return json{{"type", "score"}, {"value", j.value}};
            } else if constexpr (std::is_same_v<J, Preference>) {
                return json{{"type", "preference"}, {"choice", to_string(j.choice)}};
            } else {
                return json{{"type", "class"}, {"label", to_string(j.label)}};
            }
        },
        judgement);
}

Result<Judgement> judgement_from_json(const json& value) {
    if (!value.is_object() || !value.contains("type")) {
        return make_error(ErrorCode::JsonError, "ground_truth must be a tagged object");
    }
    const std::string type = value["type"].get<std::string>();
    if (type == "score") {
        if (!value.contains("value") || !value["value"].is_number_integer()) {
            return make_error(ErrorCode::JsonError, "score judgement needs integer 'value'");
        }
        return Judgement{Score{value["value"].get<int>()}};
    }
    if (type == "preference") {
        if (!value.contains("choice")) {
            return make_error(ErrorCode::JsonError, "preference judgement needs 'choice'");
        }
        auto choice = preference_from_label(value["choice"].get<std::string>());
        if (!choice) {
            return make_error(ErrorCode::JsonError,
                              "unknown preference choice: " + value["choice"].get<std::string>());
        }
        return Judgement{Preference{*choice}};
    }
    if (type == "class") {
        if (!value.contains("label")) {
            return make_error(ErrorCode::JsonError, "class judgement needs 'label'");
        }
        auto label = class_label_from_text(value["label"].get<std::string>());
        if (!label) {
            return make_error(ErrorCode::JsonError,
                              "unknown class label: " + value["label"].get<std::string>());
        }
        return Judgement{ClassDecision{*label}};
    }
    return make_error(ErrorCode::JsonError, "unknown judgement type: " + type);
}

}  // namespace

std::string record_to_json_line(const EvaluationRecord& record) {
    json obj;
    obj["id"] = record.id;
    obj["task"] = to_string(record.protocol.task);
    obj["template_id"] = record.protocol.template_id;
    obj["instruction"] = record.instruction;
    obj["responses"] = record.responses;
    obj["ground_truth"] = judgement_to_json(record.ground_truth);
    if (record.category) obj["category"] = *record.category;
    if (!record.protocol.extra_fields.empty()) {
        obj["extra_fields"] = record.protocol.extra_fields;
    }
    return obj.dump();
}

Result<EvaluationRecord> record_from_json_line(const std::string& line,
                                               const TemplateDirectory* directory) try {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        return make_error(ErrorCode::JsonError, "record line is not a JSON object");
    }
    for (const char* key : {"id", "task", "template_id", "instruction", "responses", "ground_truth"}) {
        if (!obj.contains(key)) {
            return make_error(ErrorCode::JsonError, std::string("record missing key '") + key + "'");
        }
    }

    EvaluationRecord record;
    record.id = obj["id"].get<std::string>();
    auto task = task_kind_from_string(obj["task"].get<std::string>());
    if (!task) {
        return make_error(ErrorCode::JsonError, "unknown task: " + obj["task"].get<std::string>());
    }
    record.protocol.task = *task;
    record.protocol.template_id = obj["template_id"].get<std::string>();
    record.instruction = obj["instruction"].get<std::string>();
    if (!obj["responses"].is_array()) {
        return make_error(ErrorCode::JsonError, "responses must be an array");
    }
    record.responses = obj["responses"].get<std::vector<std::string>>();

    auto truth = judgement_from_json(obj["ground_truth"]);
    if (!truth.ok()) return truth.error();
    record.ground_truth = truth.value();

    if (obj.contains("category") && !obj["category"].is_null()) {
        record.category = obj["category"].get<std::string>();
    }
    if (obj.contains("extra_fields") && !obj["extra_fields"].is_null()) {
        record.protocol.extra_fields =
            obj["extra_fields"].get<std::map<std::string, std::string>>();
    }

    if (directory != nullptr) {
        if (auto info = directory->lookup(record.protocol.template_id)) {
            record.protocol.allows_tie = info->allows_tie;
        }
    }
    return record;
} catch (const json::exception& e) {
    return make_error(ErrorCode::JsonError, e.what());
}

std::string pair_to_json_line(const PreferencePair& pair) {
    json obj;
    obj["kind"] = to_string(pair.kind);
    obj["prompt"] = pair.prompt;
    obj["chosen"] = pair.chosen;
    obj["rejected"] = pair.rejected;
    obj["source_record_id"] = pair.source_record_id;
    return obj.dump();
}

Result<PreferencePair> pair_from_json_line(const std::string& line) try {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        return make_error(ErrorCode::JsonError, "pair line is not a JSON object");
    }
    for (const char* key : {"kind", "prompt", "chosen", "rejected", "source_record_id"}) {
        if (!obj.contains(key)) {
            return make_error(ErrorCode::JsonError, std::string("pair missing key '") + key + "'");
        }
    }
    auto kind = pair_kind_from_string(obj["kind"].get<std::string>());
    if (!kind) {
        return make_error(ErrorCode::JsonError, "unknown pair kind: " + obj["kind"].get<std::string>());
    }
    PreferencePair pair;
    pair.kind = *kind;
    pair.prompt = obj["prompt"].get<std::string>();
    pair.chosen = obj["chosen"].get<std::string>();
    pair.rejected = obj["rejected"].get<std::string>();
    pair.source_record_id = obj["source_record_id"].get<std::string>();
    return pair;
} catch (const json::exception& e) {
    return make_error(ErrorCode::JsonError, e.what());
}

Result<std::vector<std::string>> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return make_error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

Status write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) return make_error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) return make_error(ErrorCode::IoError, "write failed: " + path.string());
    return ok_status();
}

Result<std::vector<EvaluationRecord>> load_records(const std::filesystem::path& path,
                                                   const TemplateDirectory* directory) {
    auto lines = read_lines(path);
    if (!lines.ok()) return lines.error();
    std::vector<EvaluationRecord> records;
    records.reserve(lines->size());
    for (size_t i = 0; i < lines->size(); ++i) {
        auto record = record_from_json_line((*lines)[i], directory);
        if (!record.ok()) {
            return make_error(record.error().code,
                              path.string() + ":" + std::to_string(i + 1) + ": " + record.error().message);
        }
        records.push_back(std::move(record).value());
    }
    return records;
}

Status save_records(const std::filesystem::path& path,
                    const std::vector<EvaluationRecord>& records) {
    std::string text;
    for (const auto& record : records) {
        text += record_to_json_line(record);
        text += '\n';
    }
    return write_text(path, text);
}

Result<std::vector<PreferencePair>> load_pairs(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    if (!lines.ok()) return lines.error();
    std::vector<PreferencePair> pairs;
    pairs.reserve(lines->size());
    for (size_t i = 0; i < lines->size(); ++i) {
        auto pair = pair_from_json_line((*lines)[i]);
        if (!pair.ok()) {
            return make_error(pair.error().code,
                              path.string() + ":" + std::to_string(i + 1) + ": " + pair.error().message);
        }
        pairs.push_back(std::move(pair).value());
    }
    return pairs;
}

Status save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
    std::string text;
    for (const auto& pair : pairs) {
        text += pair_to_json_line(pair);
        text += '\n';
    }
    return write_text(path, text);
}

}  // namespace judgekit::jsonl
