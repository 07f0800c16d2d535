#include "judgekit/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace judgekit::templates {

namespace {

constexpr const char* kFormatIntro = "Your reply should strictly follow this format:";

struct EmbeddedTemplate {
    const char* id;
    const char* task;
    bool emits_cot;
    bool allows_tie;
    bool source_verbatim;
    const char* body;
};

const EmbeddedTemplate kEmbedded[] = {
#include "templates_embedded.inc"
};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += '\n';
        out += lines[i];
    }
    return out;
}

bool is_placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

bool starts_with(const std::string& line, std::string_view prefix) {
    return line.size() >= prefix.size() && line.compare(0, prefix.size(), prefix) == 0;
}

// "Instruction:", "Input:", "Document:" ... a bare label introducing judged data.
bool is_data_label_line(const std::string& line) {
    if (line.empty() || line.back() != ':') return false;
    for (size_t i = 0; i + 1 < line.size(); ++i) {
        const char c = line[i];
        if (!std::isalpha(static_cast<unsigned char>(c)) && c != ' ') return false;
    }
    return std::isalpha(static_cast<unsigned char>(line.front())) != 0;
}

bool is_lone_placeholder(const std::string& line) {
    if (line.size() < 3 || line.front() != '{' || line.back() != '}') return false;
    return std::all_of(line.begin() + 1, line.end() - 1, is_placeholder_char);
}

}  // namespace

std::vector<std::string> scan_placeholders(const std::string& body) {
    std::vector<std::string> names;
    size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string::npos) {
        size_t end = pos + 1;
        while (end < body.size() && is_placeholder_char(body[end])) ++end;
        if (end < body.size() && body[end] == '}' && end > pos + 1) {
            std::string name = body.substr(pos + 1, end - pos - 1);
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.push_back(std::move(name));
            }
            pos = end + 1;
        } else {
            ++pos;
        }
    }
    return names;
}

Result<std::string> render_body(const std::string& body,
                                const std::vector<std::string>& placeholders,
                                const std::map<std::string, std::string>& fields) {
    for (const auto& name : placeholders) {
        if (fields.find(name) == fields.end()) {
            return make_error(ErrorCode::MissingField, name);
        }
    }
    for (const auto& [key, _] : fields) {
        if (std::find(placeholders.begin(), placeholders.end(), key) == placeholders.end()) {
            return make_error(ErrorCode::UnknownField, key);
        }
    }

    std::string out;
    out.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        const size_t brace = body.find('{', pos);
        if (brace == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        out.append(body, pos, brace - pos);
        size_t end = brace + 1;
        while (end < body.size() && is_placeholder_char(body[end])) ++end;
        if (end < body.size() && body[end] == '}' && end > brace + 1) {
            const std::string name = body.substr(brace + 1, end - brace - 1);
            auto it = fields.find(name);
            if (it == fields.end()) {
                // scanned token not in the declared placeholder set
                return make_error(ErrorCode::MissingField, name);
            }
            out += it->second;  // verbatim, no recursive substitution
            pos = end + 1;
        } else {
            out += '{';
            pos = brace + 1;
        }
    }
    return out;
}

Result<Template> Registry::derive_no_cot(const Template& source) {
    if (!source.emits_cot) {
        return make_error(ErrorCode::AlreadyNoCot, source.id);
    }
    auto lines = split_lines(source.body);
    size_t intro = lines.size();
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i] == kFormatIntro) {
            intro = i;
            break;
        }
    }
    if (intro == lines.size()) {
        return make_error(ErrorCode::NoResultMarker,
                          source.id + ": no reply-format introduction line");
    }
    size_t result_line = lines.size();
    for (size_t i = intro + 1; i < lines.size(); ++i) {
        if (starts_with(lines[i], "**Result:**")) {
            result_line = i;
            break;
        }
    }
    if (result_line == lines.size()) {
        return make_error(ErrorCode::NoResultMarker,
                          source.id + ": no '**Result:**' line after the format introduction");
    }

    std::vector<std::string> kept(lines.begin(), lines.begin() + intro + 1);
    kept.insert(kept.end(), lines.begin() + result_line, lines.end());

    Template derived;
    derived.id = source.id + "_no_cot";
    derived.body = join_lines(kept);
    derived.placeholders = scan_placeholders(derived.body);
    derived.task = source.task;
    derived.emits_cot = false;
    derived.allows_tie = source.allows_tie;
    derived.source_verbatim = false;
    derived.derived_from = source.id;
    return derived;
}

std::string Registry::protocol_section(const Template& source) {
    auto lines = split_lines(source.body);
    size_t cut = lines.size();
    for (size_t i = 0; i < lines.size(); ++i) {
        if (starts_with(lines[i], "Here is the data")) {
            cut = i;
            break;
        }
        if (is_data_label_line(lines[i])) {
            // a label counts as data only when judged content follows it
            size_t next = i + 1;
            while (next < lines.size() && lines[next].empty()) ++next;
            if (next < lines.size() && (lines[next] == "```" || is_lone_placeholder(lines[next]))) {
                cut = i;
                break;
            }
        }
    }
    while (cut > 0 && lines[cut - 1].empty()) --cut;
    return join_lines({lines.begin(), lines.begin() + cut});
}

Status Registry::add(Template tmpl) {
    if (tmpl.id.empty()) return make_error(ErrorCode::EmptyField, "template id");
    if (templates_.count(tmpl.id) != 0) {
        return make_error(ErrorCode::UnknownField, "duplicate template id: " + tmpl.id);
    }
    if (tmpl.placeholders.empty()) tmpl.placeholders = scan_placeholders(tmpl.body);
    templates_.emplace(tmpl.id, std::move(tmpl));
    return ok_status();
}

Status Registry::materialize_no_cot_variants() {
    std::vector<const Template*> sources;
    for (const auto& [_, tmpl] : templates_) {
        if (tmpl.emits_cot) sources.push_back(&tmpl);
    }
    for (const Template* source : sources) {
        auto derived = derive_no_cot(*source);
        if (!derived.ok()) return derived.error();
        if (auto status = add(std::move(derived).value()); !status.ok()) return status.error();
    }
    return ok_status();
}

const Registry& Registry::builtin() {
    static const Registry registry = [] {
        Registry r;
        for (const auto& entry : kEmbedded) {
            Template tmpl;
            tmpl.id = entry.id;
            tmpl.body = entry.body;
            auto task = task_kind_from_string(entry.task);
            if (!task) throw std::logic_error("embedded template with unknown task: " + tmpl.id);
            tmpl.task = *task;
            tmpl.emits_cot = entry.emits_cot;
            tmpl.allows_tie = entry.allows_tie;
            tmpl.source_verbatim = entry.source_verbatim;
            if (auto status = r.add(std::move(tmpl)); !status.ok()) {
                throw std::logic_error(status.error().describe());
            }
        }
        if (auto status = r.materialize_no_cot_variants(); !status.ok()) {
            throw std::logic_error(status.error().describe());
        }
        return r;
    }();
    return registry;
}

Result<Registry> Registry::load_from_directory(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) return make_error(ErrorCode::IoError, "cannot open " + manifest_path.string());
    nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("templates")) {
        return make_error(ErrorCode::JsonError, manifest_path.string() + " is not a template manifest");
    }

    Registry registry;
    for (const auto& entry : manifest["templates"]) {
        Template tmpl;
        tmpl.id = entry.at("id").get<std::string>();
        auto task = task_kind_from_string(entry.at("task").get<std::string>());
        if (!task) {
            return make_error(ErrorCode::JsonError, tmpl.id + ": unknown task in manifest");
        }
        tmpl.task = *task;
        tmpl.emits_cot = entry.at("emits_cot").get<bool>();
        tmpl.allows_tie = entry.value("allows_tie", false);
        tmpl.source_verbatim = entry.value("source_verbatim", true);

        const auto file = dir / entry.at("file").get<std::string>();
        std::ifstream body_in(file, std::ios::binary);
        if (!body_in) return make_error(ErrorCode::IoError, "cannot open " + file.string());
        std::ostringstream buffer;
        buffer << body_in.rdbuf();
        tmpl.body = buffer.str();

        if (auto status = registry.add(std::move(tmpl)); !status.ok()) return status.error();
    }
    if (auto status = registry.materialize_no_cot_variants(); !status.ok()) return status.error();
    return registry;
}

const Template* Registry::find(const std::string& id) const {
    auto it = templates_.find(id);
    return it == templates_.end() ? nullptr : &it->second;
}

Result<std::string> Registry::render(const std::string& id,
                                     const std::map<std::string, std::string>& fields) const {
    const Template* tmpl = find(id);
    if (tmpl == nullptr) return make_error(ErrorCode::UnknownTemplate, id);
    return render_body(tmpl->body, tmpl->placeholders, fields);
}

Result<std::string> Registry::strip_cot_instructions(const std::string& id) const {
    const Template* tmpl = find(id);
    if (tmpl == nullptr) return make_error(ErrorCode::UnknownTemplate, id);
    if (!tmpl->emits_cot) return make_error(ErrorCode::AlreadyNoCot, id);
    const std::string derived_id = id + "_no_cot";
    if (find(derived_id) == nullptr) {
        return make_error(ErrorCode::UnknownTemplate, derived_id + " (variant not materialized)");
    }
    return derived_id;
}

Result<std::string> Registry::render_record(const EvaluationRecord& record,
                                            bool swap_responses,
                                            const std::optional<std::string>& override_id) const {
    const std::string& id = override_id ? *override_id : record.protocol.template_id;
    const Template* tmpl = find(id);
    if (tmpl == nullptr) return make_error(ErrorCode::UnknownTemplate, id);
    auto fields = bind_record_fields(record, tmpl->placeholders, swap_responses);
    if (!fields.ok()) return fields.error();
    return render_body(tmpl->body, tmpl->placeholders, fields.value());
}

std::vector<std::string> Registry::ids() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::optional<TemplateDirectory::Info> Registry::lookup(const std::string& template_id) const {
    const Template* tmpl = find(template_id);
    if (tmpl == nullptr) return std::nullopt;
    Info info;
    info.task = tmpl->task;
    info.emits_cot = tmpl->emits_cot;
    info.allows_tie = tmpl->allows_tie;
    info.placeholders = tmpl->placeholders;
    return info;
}

}  // namespace judgekit::templates
