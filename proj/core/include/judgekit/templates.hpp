#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/result.hpp"
#include "judgekit/types.hpp"

namespace judgekit::templates {

/// One prompt template. Bodies are byte-exact; placeholders are the ordered
/// unique {name} tokens occurring in the body.
struct Template {
    std::string id;
    std::string body;
    std::vector<std::string> placeholders;
    TaskKind task{TaskKind::PairwiseComparison};
    bool emits_cot{false};
    bool allows_tie{false};
    bool source_verbatim{true};
    std::optional<std::string> derived_from;  // set on materialized no-CoT variants
};

/// Substitutes {name} tokens in `body`. Values are inserted verbatim; braces
/// inside values are never re-expanded. Errors: MissingField, UnknownField.
Result<std::string> render_body(const std::string& body,
                                const std::vector<std::string>& placeholders,
                                const std::map<std::string, std::string>& fields);

/// Ordered unique {name} tokens in a body. Names are [a-z0-9_]+.
std::vector<std::string> scan_placeholders(const std::string& body);

/// Read-only registry of prompt templates. No-CoT variants ("<id>_no_cot")
/// are materialized when the registry is built so their bodies can be
/// audited byte-for-byte.
class Registry : public TemplateDirectory {
public:
    /// Registry embedded in the library (the shipped template set).
    static const Registry& builtin();

    /// Loads a template directory: a manifest.json next to one text file per
    /// template. Derived no-CoT variants are materialized after loading.
    static Result<Registry> load_from_directory(const std::filesystem::path& dir);

    const Template* find(const std::string& id) const;
    Result<std::string> render(const std::string& id,
                               const std::map<std::string, std::string>& fields) const;

    /// The registered no-CoT variant derived from `id`.
    /// Errors: UnknownTemplate, AlreadyNoCot (id already has emits_cot=false).
    Result<std::string> strip_cot_instructions(const std::string& id) const;

    /// Renders a record through its protocol template (or an override id).
    Result<std::string> render_record(const EvaluationRecord& record,
                                      bool swap_responses = false,
                                      const std::optional<std::string>& override_id = {}) const;

    std::vector<std::string> ids() const;  // sorted
    std::optional<Info> lookup(const std::string& template_id) const override;

    /// Computes the no-CoT variant of a CoT template: the reply-format lines
    /// between the format introduction and the "**Result:**" line are
    /// removed; everything else is unchanged.
    static Result<Template> derive_no_cot(const Template& source);

    /// Template text before the data section ("Here is the data ..." or the
    /// first data label). This is the instruction a judge receives, without
    /// any judged content; the response-deduction prompts embed it.
    static std::string protocol_section(const Template& source);

private:
    Status add(Template tmpl);
    Status materialize_no_cot_variants();

    std::map<std::string, Template> templates_;
};

}  // namespace judgekit::templates
