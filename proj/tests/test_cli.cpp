#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>

namespace {

struct CommandOutput {
    int exit_code{};
    std::string stdout_text;
};

CommandOutput run_command(const std::string& command) {
    CommandOutput output;
    FILE* pipe = popen((command + " 2>/dev/null").c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    std::array<char, 4096> buffer{};
    std::size_t n = 0;
    while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
        output.stdout_text.append(buffer.data(), n);
    }
    const int status = pclose(pipe);
    output.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return output;
}

const std::string kCli = JUDGEKIT_CLI_PATH;
const std::string kData = JUDGEKIT_TEST_DATA_DIR;

TEST(Cli, UnknownSubcommandExitsWithUsageError) {
    EXPECT_EQ(run_command(kCli + " frobnicate").exit_code, 2);
    EXPECT_EQ(run_command(kCli).exit_code, 2);
}

TEST(Cli, HelpExitsZero) {
    auto output = run_command(kCli + " --help");
    EXPECT_EQ(output.exit_code, 0);
    EXPECT_NE(output.stdout_text.find("curate"), std::string::npos);
    EXPECT_NE(output.stdout_text.find("evaluate"), std::string::npos);
    EXPECT_NE(output.stdout_text.find("loss-check"), std::string::npos);
}

TEST(Cli, TemplatesListAndShow) {
    auto list = run_command(kCli + " templates list");
    EXPECT_EQ(list.exit_code, 0);
    EXPECT_NE(list.stdout_text.find("rewardbench"), std::string::npos);
    EXPECT_NE(list.stdout_text.find("deduction_pairwise"), std::string::npos);

    auto show = run_command(kCli + " templates show refinement");
    EXPECT_EQ(show.exit_code, 0);
    EXPECT_NE(show.stdout_text.find("**Improved Response:**"), std::string::npos);

    EXPECT_EQ(run_command(kCli + " templates show nonexistent").exit_code, 1);
}

TEST(Cli, TemplatesRender) {
    auto rendered = run_command(kCli +
                                " templates render llm_aggrefact"
                                " --field document=DOC --field claim=CLAIM");
    EXPECT_EQ(rendered.exit_code, 0);
    EXPECT_NE(rendered.stdout_text.find("DOC"), std::string::npos);
    EXPECT_NE(rendered.stdout_text.find("CLAIM"), std::string::npos);

    auto missing = run_command(kCli + " templates render llm_aggrefact --field document=DOC");
    EXPECT_EQ(missing.exit_code, 1);
}

TEST(Cli, LossCheckZeroMarginFixturePrintsLogTwo) {
    auto output = run_command(kCli + " loss-check --instances " + kData + "/zero_margin.jsonl");
    EXPECT_EQ(output.exit_code, 0);
    EXPECT_NE(output.stdout_text.find("dpo = 0.693147"), std::string::npos);
    EXPECT_NE(output.stdout_text.find("grad-check"), std::string::npos);
}

TEST(Cli, LossCheckMissingFileFails) {
    EXPECT_EQ(run_command(kCli + " loss-check --instances /nonexistent.jsonl").exit_code, 1);
}

TEST(Cli, EvaluateWithoutEndpointFails) {
    auto output = run_command("env -u JUDGE_API_BASE " + kCli + " evaluate --benchmark " + kData +
                              "/zero_margin.jsonl --model m");
    EXPECT_EQ(output.exit_code, 1);
}

}  // namespace
