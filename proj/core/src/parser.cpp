#include "judgekit/parser.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>

namespace judgekit::parser {

namespace {

bool ieq(char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
}

struct MarkerHit {
    size_t marker_begin;   // first byte of the marker (including leading asterisks)
    size_t content_begin;  // first byte after the marker
};

// Matches `word` at `pos` allowing optional bold asterisks and requiring a
// colon: **Word:**, **Word**:, Word:, *word:* ... A stray extra colon after
// the closing bold (seen when format blocks are echoed verbatim) is consumed.
std::optional<MarkerHit> match_marker_at(std::string_view text, size_t pos, std::string_view word) {
    size_t begin = pos;
    size_t stars = 0;
    while (begin > 0 && text[begin - 1] == '*' && stars < 2) {
        --begin;
        ++stars;
    }
    // reject matches inside a larger word ("SubResult:")
    if (begin > 0 && (std::isalnum(static_cast<unsigned char>(text[begin - 1])) != 0)) {
        return std::nullopt;
    }
    if (pos + word.size() > text.size()) return std::nullopt;
    for (size_t i = 0; i < word.size(); ++i) {
        if (!ieq(text[pos + i], word[i])) return std::nullopt;
    }

    size_t cursor = pos + word.size();
    auto skip_stars = [&] {
        size_t n = 0;
        while (cursor < text.size() && text[cursor] == '*' && n < 2) {
            ++cursor;
            ++n;
        }
    };
    bool colon = false;
    if (cursor < text.size() && text[cursor] == ':') {  // Word:** or Word:
        ++cursor;
        colon = true;
        skip_stars();
    } else {  // Word**: or nothing
        skip_stars();
        if (cursor < text.size() && text[cursor] == ':') {
            ++cursor;
            colon = true;
        }
    }
    if (!colon) return std::nullopt;
    if (cursor < text.size() && text[cursor] == ':') ++cursor;  // "**Word:**:"
    return MarkerHit{begin, cursor};
}

std::optional<MarkerHit> find_last_marker(std::string_view text, std::string_view word,
                                          size_t limit = std::string_view::npos) {
    std::optional<MarkerHit> last;
    const size_t end = std::min(limit, text.size());
    for (size_t pos = 0; pos + word.size() <= end; ++pos) {
        if (!ieq(text[pos], word[0])) continue;
        if (auto hit = match_marker_at(text, pos, word)) {
            if (hit->marker_begin < end) last = hit;
        }
    }
    return last;
}

std::optional<MarkerHit> find_first_marker_after(std::string_view text, std::string_view word,
                                                 size_t from) {
    for (size_t pos = from; pos + word.size() <= text.size(); ++pos) {
        if (!ieq(text[pos], word[0])) continue;
        if (auto hit = match_marker_at(text, pos, word)) {
            if (hit->marker_begin >= from) return hit;
        }
    }
    return std::nullopt;
}

// Value text for a result marker: remainder of the marker's line, falling
// back to the next non-empty line when the marker ends the line.
std::string_view value_span(std::string_view text, size_t content_begin) {
    size_t line_end = text.find('\n', content_begin);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::string_view same_line = text.substr(content_begin, line_end - content_begin);
    if (!trim(same_line).empty()) return same_line;

    size_t pos = line_end;
    while (pos < text.size()) {
        size_t next_end = text.find('\n', pos + 1);
        if (next_end == std::string_view::npos) next_end = text.size();
        std::string_view line = text.substr(pos + 1, next_end - pos - 1);
        if (!trim(line).empty()) return line;
        pos = next_end;
    }
    return same_line;
}

Result<Judgement> parse_result_value(std::string_view value, TaskKind task, bool allows_tie) {
    const std::string norm = normalize_label(value);
    if (norm.empty()) {
        return make_error(ErrorCode::AmbiguousResult, "result marker carries no value");
    }
    switch (task) {
        case TaskKind::SingleRating: {
            int score = 0;
            auto [ptr, ec] = std::from_chars(norm.data(), norm.data() + norm.size(), score);
            if (ec != std::errc{} || ptr != norm.data() + norm.size()) {
                return make_error(ErrorCode::AmbiguousResult, "not an integer: " + norm);
            }
            if (score < 1 || score > 5) {
                return make_error(ErrorCode::ScoreOutOfRange, norm);
            }
            return Judgement{Score{score}};
        }
        case TaskKind::PairwiseComparison: {
            auto choice = preference_from_label(norm);
            if (!choice) {
                return make_error(ErrorCode::AmbiguousResult, "not A/B/Tie: " + norm);
            }
            if (*choice == PreferenceChoice::Tie && !allows_tie) {
                return make_error(ErrorCode::AmbiguousResult, "Tie not permitted by this protocol");
            }
            return Judgement{Preference{*choice}};
        }
        case TaskKind::Classification: {
            auto label = class_label_from_text(norm);
            if (!label) {
                return make_error(ErrorCode::AmbiguousResult, "not Yes/No: " + norm);
            }
            return Judgement{ClassDecision{*label}};
        }
    }
    return make_error(ErrorCode::AmbiguousResult, "unknown task kind");
}

}  // namespace

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])) != 0) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1])) != 0) --end;
    return std::string(text.substr(begin, end - begin));
}

Result<JudgeOutput> parse_judge_output(std::string_view text,
                                       TaskKind task,
                                       bool allows_tie,
                                       bool expects_cot) {
    auto result_marker = find_last_marker(text, "Result");
    if (!result_marker) {
        return make_error(ErrorCode::NoResultMarker, "no result marker in reply");
    }
    auto judgement = parse_result_value(value_span(text, result_marker->content_begin),
                                        task, allows_tie);
    if (!judgement.ok()) return judgement.error();

    JudgeOutput output;
    output.judgement = judgement.value();
    output.raw = std::string(text);
    if (expects_cot) {
        auto reasoning = find_last_marker(text, "Reasoning", result_marker->marker_begin);
        if (reasoning && reasoning->content_begin <= result_marker->marker_begin) {
            output.critique = trim(text.substr(reasoning->content_begin,
                                               result_marker->marker_begin - reasoning->content_begin));
        } else {
            output.critique = trim(text.substr(0, result_marker->marker_begin));
        }
    }
    return output;
}

Result<std::vector<std::string>> parse_deduction(std::string_view text, TaskKind task) {
    if (task == TaskKind::PairwiseComparison) {
        auto a = find_last_marker(text, "Response A");
        if (!a) {
            return make_error(ErrorCode::MissingResponseMarker, "no 'Response A' marker");
        }
        auto b = find_first_marker_after(text, "Response B", a->content_begin);
        if (!b) {
            return make_error(ErrorCode::MissingSecondResponse, "no 'Response B' marker after A");
        }
        return std::vector<std::string>{
            trim(text.substr(a->content_begin, b->marker_begin - a->content_begin)),
            trim(text.substr(b->content_begin)),
        };
    }
    auto marker = find_last_marker(text, "Response");
    if (!marker) {
        return make_error(ErrorCode::MissingResponseMarker, "no 'Response' marker");
    }
    return std::vector<std::string>{trim(text.substr(marker->content_begin))};
}

Result<std::string> parse_refinement(std::string_view text) {
    auto marker = find_last_marker(text, "Improved Response");
    if (!marker) {
        return make_error(ErrorCode::MissingImprovedMarker, "no 'Improved Response' marker");
    }
    return trim(text.substr(marker->content_begin));
}

std::string render_reply(const std::optional<std::string>& critique, const Judgement& judgement) {
    std::string out;
    if (critique) {
        out += "**Reasoning:** ";
        out += *critique;
        out += "\n\n";
    }
    out += "**Result:** ";
    out += judgement_value_text(judgement);
    return out;
}

std::string render_deduction_reply(const std::vector<std::string>& responses, TaskKind task) {
    if (task == TaskKind::PairwiseComparison) {
        if (responses.size() != 2) {
            throw std::invalid_argument("render_deduction_reply: pairwise needs two responses");
        }
        return "**Response A:** " + responses[0] + "\n\n**Response B:** " + responses[1];
    }
    if (responses.size() != 1) {
        throw std::invalid_argument("render_deduction_reply: expected one response");
    }
    return "**Response:** " + responses[0];
}

}  // namespace judgekit::parser
