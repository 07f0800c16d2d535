#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "judgekit/templates.hpp"
#include "support/test_support.hpp"

namespace judgekit::templates {
namespace {

const Registry& reg() { return Registry::builtin(); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in) << path;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

TEST(Render, RewardBenchOpening) {
    auto rendered = reg().render("rewardbench", {{"input", "INS"},
                                                 {"output_1", "R1"},
                                                 {"output_2", "R2"}});
    ASSERT_TRUE(rendered.ok());
    EXPECT_EQ(rendered.value().rfind(
                  "You are a helpful assistant in evaluating the quality of the responses", 0),
              0u);
    EXPECT_NE(rendered.value().find("INS"), std::string::npos);
    EXPECT_NE(rendered.value().find("R1"), std::string::npos);
    EXPECT_NE(rendered.value().find("R2"), std::string::npos);
    EXPECT_EQ(rendered.value().find('{'), std::string::npos);
}

TEST(Render, RefinementContainsImprovedBlock) {
    auto rendered = reg().render("refinement", {{"instruction", "I"},
                                                {"response", "R"},
                                                {"feedback", "F"}});
    ASSERT_TRUE(rendered.ok());
    EXPECT_NE(rendered.value().find("**Improved Response:** <an improved response>"),
              std::string::npos);
}

TEST(Render, MissingAndUnknownFields) {
    auto missing = reg().render("rewardbench", {{"input", "I"}, {"output_1", "R1"}});
    ASSERT_FALSE(missing.ok());
    EXPECT_EQ(missing.error().code, ErrorCode::MissingField);
    EXPECT_EQ(missing.error().message, "output_2");

    auto unknown = reg().render("rewardbench", {{"input", "I"},
                                                {"output_1", "R1"},
                                                {"output_2", "R2"},
                                                {"extra", "x"}});
    ASSERT_FALSE(unknown.ok());
    EXPECT_EQ(unknown.error().code, ErrorCode::UnknownField);

    auto unknown_template = reg().render("no_such_template", {});
    ASSERT_FALSE(unknown_template.ok());
    EXPECT_EQ(unknown_template.error().code, ErrorCode::UnknownTemplate);
}

TEST(Render, BracesInValuesAreNotReExpanded) {
    auto rendered = reg().render("llm_aggrefact",
                                 {{"document", "code { with } braces and {claim}"},
                                  {"claim", "plain"}});
    ASSERT_TRUE(rendered.ok());
    EXPECT_NE(rendered.value().find("code { with } braces and {claim}"), std::string::npos);
}

TEST(Registry, ContainsAllRequiredTemplates) {
    const char* required[] = {"deduction_single", "deduction_pairwise", "refinement",
                              "rewardbench",      "prepair",            "instrusum",
                              "autoj",            "hhh",                "lfqa",
                              "feedbackbench",    "evalbiasbench",      "single_rating",
                              "llm_aggrefact",    "infobench",          "likert_additive"};
    for (const char* id : required) {
        EXPECT_NE(reg().find(id), nullptr) << id;
    }
    EXPECT_TRUE(reg().find("autoj")->allows_tie);
    EXPECT_FALSE(reg().find("rewardbench")->allows_tie);
    EXPECT_FALSE(reg().find("likert_additive")->source_verbatim);
}

// substitution with sentinel values is injective: reverse substitution
// recovers the body byte-for-byte
TEST(Registry, RenderReverseSubstitutionRecoversBody) {
    for (const auto& id : reg().ids()) {
        const Template* tmpl = reg().find(id);
        std::map<std::string, std::string> fields;
        for (const auto& name : tmpl->placeholders) {
            fields[name] = "<sentinel-" + name + ">";
        }
        auto rendered = reg().render(id, fields);
        ASSERT_TRUE(rendered.ok()) << id;
        std::string recovered = rendered.value();
        for (const auto& name : tmpl->placeholders) {
            const std::string sentinel = "<sentinel-" + name + ">";
            size_t pos = 0;
            while ((pos = recovered.find(sentinel, pos)) != std::string::npos) {
                recovered.replace(pos, sentinel.size(), "{" + name + "}");
                pos += name.size() + 2;
            }
        }
        EXPECT_EQ(recovered, tmpl->body) << id;
    }
}

TEST(StripCot, DerivedVariantShape) {
    auto derived_id = reg().strip_cot_instructions("rewardbench");
    ASSERT_TRUE(derived_id.ok());
    const Template* derived = reg().find(derived_id.value());
    ASSERT_NE(derived, nullptr);
    EXPECT_FALSE(derived->emits_cot);
    EXPECT_EQ(derived->derived_from, "rewardbench");
    EXPECT_NE(derived->body.find("**Result:**"), std::string::npos);
    EXPECT_EQ(derived->body.find("**Reasoning:**"), std::string::npos);
}

TEST(StripCot, AlreadyNoCotAndUnknown) {
    auto again = reg().strip_cot_instructions("rewardbench_no_cot");
    ASSERT_FALSE(again.ok());
    EXPECT_EQ(again.error().code, ErrorCode::AlreadyNoCot);

    auto deduction = reg().strip_cot_instructions("deduction_single");
    ASSERT_FALSE(deduction.ok());
    EXPECT_EQ(deduction.error().code, ErrorCode::AlreadyNoCot);

    auto unknown = reg().strip_cot_instructions("missing");
    ASSERT_FALSE(unknown.ok());
    EXPECT_EQ(unknown.error().code, ErrorCode::UnknownTemplate);
}

// removing the reasoning block must not touch anything outside the format block
TEST(StripCot, OnlyFormatBlockChanges) {
    constexpr const char* intro = "Your reply should strictly follow this format:";
    for (const auto& id : reg().ids()) {
        const Template* source = reg().find(id);
        if (!source->emits_cot) continue;
        const Template* derived = reg().find(id + "_no_cot");
        ASSERT_NE(derived, nullptr) << id;

        const auto src_intro = source->body.find(intro);
        const auto der_intro = derived->body.find(intro);
        ASSERT_NE(src_intro, std::string::npos) << id;
        // identical prefix up to and including the format introduction
        EXPECT_EQ(source->body.substr(0, src_intro), derived->body.substr(0, der_intro)) << id;

        const auto src_result = source->body.find("**Result:**", src_intro);
        const auto der_result = derived->body.find("**Result:**", der_intro);
        ASSERT_NE(src_result, std::string::npos) << id;
        // identical suffix from the result line onward
        EXPECT_EQ(source->body.substr(src_result), derived->body.substr(der_result)) << id;
        // and the derived format block holds nothing between intro and result
        EXPECT_EQ(derived->body.substr(der_intro, der_result - der_intro),
                  std::string(intro) + "\n")
            << id;
    }
}

TEST(Registry, BuiltinMatchesTemplateDirectory) {
    auto from_dir = Registry::load_from_directory(JUDGEKIT_TEMPLATE_SOURCE_DIR);
    ASSERT_TRUE(from_dir.ok());
    ASSERT_EQ(from_dir.value().ids(), reg().ids());
    for (const auto& id : reg().ids()) {
        EXPECT_EQ(from_dir.value().find(id)->body, reg().find(id)->body) << id;
        EXPECT_EQ(from_dir.value().find(id)->emits_cot, reg().find(id)->emits_cot) << id;
        EXPECT_EQ(from_dir.value().find(id)->allows_tie, reg().find(id)->allows_tie) << id;
    }
}

TEST(Registry, BodiesMatchTemplateFilesExactly) {
    for (const auto& id : reg().ids()) {
        const Template* tmpl = reg().find(id);
        if (tmpl->derived_from) continue;  // materialized, not stored
        const std::string path = std::string(JUDGEKIT_TEMPLATE_SOURCE_DIR) + "/" + id + ".txt";
        EXPECT_EQ(tmpl->body, read_file(path)) << id;
    }
}

TEST(ProtocolSection, CutsBeforeJudgedData) {
    const auto section = Registry::protocol_section(*reg().find("rewardbench"));
    EXPECT_NE(section.find("**Result:** <A or B>"), std::string::npos);
    EXPECT_EQ(section.find("Here is the data."), std::string::npos);
    EXPECT_EQ(section.find("{input}"), std::string::npos);

    // infobench has no "Here is the data" line; the cut happens at the first data label
    const auto info = Registry::protocol_section(*reg().find("infobench"));
    EXPECT_NE(info.find("**Result:** <Yes or No>"), std::string::npos);
    EXPECT_EQ(info.find("{response}"), std::string::npos);
    EXPECT_EQ(info.find("Generated Text:"), std::string::npos);
}

TEST(RenderRecord, BindsRecordOntoTemplate) {
    auto record = testing::make_pairwise_record("rr1", true);
    auto rendered = reg().render_record(record);
    ASSERT_TRUE(rendered.ok());
    EXPECT_NE(rendered.value().find(record.instruction), std::string::npos);
    EXPECT_NE(rendered.value().find(record.responses[0]), std::string::npos);
    EXPECT_NE(rendered.value().find(record.responses[1]), std::string::npos);

    auto swapped = reg().render_record(record, /*swap_responses=*/true);
    ASSERT_TRUE(swapped.ok());
    EXPECT_NE(swapped.value(), rendered.value());
}

}  // namespace
}  // namespace judgekit::templates
