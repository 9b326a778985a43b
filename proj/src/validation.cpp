#include "lassolens/validation.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

constexpr std::size_t kMinBullets = 3;
constexpr std::size_t kMaxBullets = 5;
constexpr std::size_t kWordLimit = 200;
constexpr std::size_t kMaxPairGap = 40;

bool is_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

struct Token {
    std::string text;  // lowercase
    TextSpan span;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_alnum(text[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_alnum(text[i])) ++i;
        out.push_back({to_lower(text.substr(start, i - start)), {start, i}});
    }
    return out;
}

/// Splits an identifier on separators, lower->upper and letter<->digit boundaries.
std::vector<std::string> identifier_tokens(std::string_view name) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(to_lower(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        const char c = name[i];
        if (!is_alnum(c)) {
            flush();
            continue;
        }
        if (!cur.empty()) {
            const char p = cur.back();
            const bool camel = (p >= 'a' && p <= 'z') && (c >= 'A' && c <= 'Z');
            const bool digit_edge = is_digit(p) != is_digit(c);
            if (camel || digit_edge) flush();
        }
        cur += c;
    }
    flush();
    return out;
}

bool is_unit_token(std::string_view t) {
    static const std::set<std::string, std::less<>> units = {"mm", "cm", "m", "km", "g",  "kg",  "mg", "ug",
                                                              "s",  "sec", "ms", "pct", "usd", "eur", "kcal", "lb"};
    return units.count(t) > 0;
}

bool is_bullet_line(std::string_view line, std::size_t& content_start) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i + 1 < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '+') && line[i + 1] == ' ') {
        content_start = i + 2;
        return true;
    }
    if (line.substr(i).starts_with("\xE2\x80\xA2")) {
        content_start = i + 3;
        return true;
    }
    std::size_t j = i;
    while (j < line.size() && is_digit(line[j])) ++j;
    if (j > i && j + 1 < line.size() && (line[j] == '.' || line[j] == ')') && line[j + 1] == ' ') {
        content_start = j + 2;
        return true;
    }
    return false;
}

std::string strip_markup(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c != '*' && c != '#' && c != '`') out += c;
    }
    // collapse runs of "__" used as bold
    std::string cleaned;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == '_' && i + 1 < out.size() && out[i + 1] == '_') {
            ++i;
            continue;
        }
        cleaned += out[i];
    }
    return std::string(trim(cleaned));
}

// ----- number scanning -------------------------------------------------------

struct NumberToken {
    double value = 0.0;
    double resolution = 0.5;
    bool percent = false;
    TextSpan span;
};

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view what) {
    return text.substr(pos).starts_with(what);
}

std::size_t currency_length(std::string_view text, std::size_t pos) {
    if (pos >= text.size()) return 0;
    if (text[pos] == '$') return 1;
    if (starts_with_at(text, pos, "\xE2\x82\xAC")) return 3;  // euro
    if (starts_with_at(text, pos, "\xC2\xA3")) return 2;      // pound
    return 0;
}

bool preceded_by_word_char(std::string_view text, std::size_t pos) {
    if (pos == 0) return false;
    const char p = text[pos - 1];
    return is_alnum(p) || p == '_';
}

std::vector<NumberToken> scan_numbers(std::string_view text) {
    std::vector<NumberToken> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        bool negative = false;
        std::size_t p = i;
        // sign: "-", "--" or U+2212, only where it cannot be a range dash
        auto sign_allowed = [&](std::size_t at) {
            std::size_t k = at;
            while (k > 0 && text[k - 1] == ' ') --k;
            return k == 0 || !is_digit(text[k - 1]);
        };
        if (starts_with_at(text, p, "--") && sign_allowed(p)) {
            negative = true;
            p += 2;
        } else if (text[p] == '-' && sign_allowed(p) && (p == 0 || text[p - 1] != '-')) {
            negative = true;
            p += 1;
        } else if (starts_with_at(text, p, "\xE2\x88\x92") && sign_allowed(p)) {
            negative = true;
            p += 3;
        }
        p += currency_length(text, p);
        if (p >= text.size() || !is_digit(text[p]) || preceded_by_word_char(text, start)) {
            ++i;
            continue;
        }
        if (negative || p != start) {
            // the sign/currency must itself start a token
            if (preceded_by_word_char(text, start)) {
                ++i;
                continue;
            }
        }
        // integer part with optional thousands separators
        std::string digits;
        std::size_t q = p;
        while (q < text.size() && is_digit(text[q])) digits += text[q++];
        while (digits.size() <= 3 && q + 3 < text.size() + 0 && text[q] == ',' && is_digit(text[q + 1]) &&
               is_digit(text[q + 2]) && is_digit(text[q + 3]) && (q + 4 >= text.size() || !is_digit(text[q + 4]))) {
            digits += text.substr(q + 1, 3);
            q += 4;
            if (digits.size() > 3 && !(q < text.size() && text[q] == ',')) break;
        }
        int decimals = 0;
        if (q + 1 < text.size() && text[q] == '.' && is_digit(text[q + 1])) {
            digits += '.';
            ++q;
            while (q < text.size() && is_digit(text[q])) {
                digits += text[q++];
                ++decimals;
            }
        }
        // ordinals and identifiers like 3rd, 2x
        std::size_t r = q;
        while (r < text.size() && is_alpha(text[r])) ++r;
        const std::string letters = to_lower(text.substr(q, r - q));
        if (letters == "st" || letters == "nd" || letters == "rd" || letters == "th" || letters == "x") {
            i = r;
            continue;
        }
        NumberToken tok;
        tok.value = std::stod(digits);
        tok.resolution = 0.5 * std::pow(10.0, -decimals);
        std::size_t end = q;
        if (q < text.size() && text[q] == '%') {
            tok.percent = true;
            end = q + 1;
        } else if (q + 1 < text.size() && text[q] == ' ' && text[q + 1] == '%') {
            tok.percent = true;
            end = q + 2;
        } else if (letters == "k") {
            tok.value *= 1e3;
            tok.resolution *= 1e3;
            end = r;
        } else if (letters == "pp") {
            tok.percent = true;
            end = r;
        } else if (text.substr(q).starts_with("M") && letters == "m" && text.substr(q, 1) == "M") {
            tok.value *= 1e6;
            tok.resolution *= 1e6;
            end = r;
        } else if (to_lower(text.substr(q, 8)) == " percent") {
            tok.percent = true;
            end = q + 8;
        } else {
            end = r;  // unit letters such as s, mm, g
        }
        if (negative) tok.value = -tok.value;
        tok.span = {start, end};
        out.push_back(tok);
        i = end;
    }
    return out;
}

bool is_sentence_end(std::string_view text, std::size_t pos) {
    const char c = text[pos];
    if (c != '.' && c != '!' && c != '?') return false;
    if (pos + 1 < text.size() && text[pos + 1] != ' ' && text[pos + 1] != '\n') return false;
    if (c == '.') {
        // abbreviations that end in a period
        std::size_t k = pos;
        while (k > 0 && is_alpha(text[k - 1])) --k;
        const auto word = to_lower(text.substr(k, pos - k));
        if (word == "vs" || word == "approx" || word == "e" || word == "g" || word == "i" || word == "ca") return false;
    }
    return true;
}

bool is_clause_boundary(std::string_view text, std::size_t pos, bool sentence_only) {
    const char c = text[pos];
    if (c == '\n') return true;
    if (is_sentence_end(text, pos)) return true;
    if (sentence_only) return false;
    if (c == ';') return true;
    if (c == ',' && pos + 1 < text.size() && text[pos + 1] == ' ') return true;
    return false;
}

TextSpan enclosing(std::string_view text, TextSpan inner, bool sentence_only) {
    std::size_t b = inner.begin;
    while (b > 0 && !is_clause_boundary(text, b - 1, sentence_only)) --b;
    std::size_t e = inner.end;
    while (e < text.size() && !is_clause_boundary(text, e, sentence_only)) ++e;
    return {b, e};
}

enum class Link { none, pair, range };

Link link_between(std::string_view text, const NumberToken& left, const NumberToken& right) {
    if (right.span.begin < left.span.end) return Link::none;
    const std::size_t gap = right.span.begin - left.span.end;
    if (gap > kMaxPairGap) return Link::none;
    const std::string_view between = text.substr(left.span.end, gap);
    for (std::size_t k = 0; k < between.size(); ++k) {
        if (between[k] == '\n' || between[k] == ';' || is_sentence_end(text, left.span.end + k)) return Link::none;
    }
    std::string cleaned;
    for (char c : between) {
        if (c != '*' && c != '(' && c != ')' && c != '~') cleaned += c;
    }
    // drop approximate-sign bytes
    for (std::string_view approx : {"\xE2\x89\x88"}) {
        std::size_t at;
        while ((at = cleaned.find(approx)) != std::string::npos) cleaned.erase(at, approx.size());
    }
    const auto trimmed = to_lower(trim(cleaned));
    if (trimmed == "-" || trimmed == "\xE2\x80\x93" || trimmed == "\xE2\x80\x94" || trimmed == "to") return Link::range;
    const auto before = to_lower(text.substr(left.span.begin >= 10 ? left.span.begin - 10 : 0,
                                             std::min<std::size_t>(10, left.span.begin)));
    if (trimmed == "and" && before.find("between") != std::string::npos) return Link::range;
    const auto words = tokenize(trimmed);
    for (std::size_t k = 0; k < words.size(); ++k) {
        const auto& w = words[k].text;
        if (w == "vs" || w == "versus" || w == "v" || w == "against") return Link::pair;
        if (w == "compared" && k + 1 < words.size() && (words[k + 1].text == "to" || words[k + 1].text == "with")) {
            return Link::pair;
        }
    }
    return Link::none;
}

bool has_cue_before(std::string_view text, TextSpan clause, std::size_t number_begin,
                    const std::set<std::string, std::less<>>& cues, std::size_t window_tokens) {
    const auto tokens = tokenize(text.substr(clause.begin, number_begin - clause.begin));
    const std::size_t first = tokens.size() > window_tokens ? tokens.size() - window_tokens : 0;
    for (std::size_t k = first; k < tokens.size(); ++k) {
        if (cues.count(tokens[k].text)) return true;
    }
    return false;
}

bool approx_sign_before(std::string_view text, std::size_t pos) {
    std::size_t k = pos;
    while (k > 0 && (text[k - 1] == ' ' || text[k - 1] == '*')) --k;
    if (k > 0 && text[k - 1] == '~') return true;
    return k >= 3 && text.substr(k - 3, 3) == "\xE2\x89\x88";
}

bool close_to(double claimed, double actual, double resolution, double tol_rel) {
    if (!std::isfinite(actual)) return false;
    return std::abs(claimed - actual) <= std::max(tol_rel * std::abs(actual), resolution);
}

bool close_pp(double claimed_pct, double actual_fraction, double resolution, double tol_pp) {
    if (!std::isfinite(actual_fraction)) return false;
    return std::abs(claimed_pct - 100.0 * actual_fraction) <= std::max(tol_pp, resolution);
}

struct ClaimCheck {
    Verdict verdict;
    std::string detail;
};

ClaimCheck check_numerical(const NumericClaim& claim, const NumericalSummary& n, const ValidationOptions& opt) {
    if (n.insufficient()) return {Verdict::unverifiable, "insufficient data for " + n.feature};
    const auto& v = claim.values;
    const auto& res = claim.resolution;
    const double tol = opt.tol_rel;
    const auto& s = n.selected;
    const auto& r = n.rest;
    const std::string means = fmt::format("actual mean {} (selected) vs {} (rest)", display_number(s.mean),
                                          display_number(r.mean));
    auto ok = [](bool b) { return b ? Verdict::verified : Verdict::contradicted; };

    if (claim.ks_context) {
        return {ok(close_to(v[0], *n.ks, res[0], tol)), fmt::format("actual KS {:.3f}", *n.ks)};
    }
    switch (claim.kind) {
    case ClaimKind::mean_like:
        if (v.size() == 1) return {ok(close_to(v[0], s.mean, res[0], tol) || close_to(v[0], r.mean, res[0], tol)), means};
        return {ok(close_to(v[0], s.mean, res[0], tol) && close_to(v[1], r.mean, res[1], tol)), means};
    case ClaimKind::proportion:
        if (v.size() == 1) {
            return {ok(close_pp(v[0], s.mean, res[0], opt.proportion_tolerance_pp) ||
                       close_pp(v[0], r.mean, res[0], opt.proportion_tolerance_pp)),
                    means};
        }
        return {ok(close_pp(v[0], s.mean, res[0], opt.proportion_tolerance_pp) &&
                   close_pp(v[1], r.mean, res[1], opt.proportion_tolerance_pp)),
                means};
    case ClaimKind::range: {
        const bool sel = close_to(v[0], s.min, res[0], tol) && close_to(v[1], s.max, res[1], tol);
        const bool rst = close_to(v[0], r.min, res[0], tol) && close_to(v[1], r.max, res[1], tol);
        return {ok(sel || rst), fmt::format("actual range {}-{} (selected), {}-{} (rest)", display_number(s.min),
                                            display_number(s.max), display_number(r.min), display_number(r.max))};
    }
    case ClaimKind::unclassified: {
        const std::vector<std::pair<double, double>> pairs = {
            {s.mean, r.mean}, {s.min, r.min}, {s.max, r.max}, {s.std, r.std},
            {static_cast<double>(s.count), static_cast<double>(r.count)}, {s.min, s.max}, {r.min, r.max}};
        if (v.size() == 1) {
            std::vector<double> singles = {s.mean, s.min, s.max, s.std, r.mean, r.min, r.max, r.std, *n.ks,
                                           static_cast<double>(s.count), static_cast<double>(r.count),
                                           static_cast<double>(s.missing_count), static_cast<double>(r.missing_count)};
            const bool any = std::any_of(singles.begin(), singles.end(),
                                         [&](double a) { return close_to(v[0], a, res[0], tol); });
            return {ok(any), means};
        }
        const bool any = std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) {
            return close_to(v[0], p.first, res[0], tol) && close_to(v[1], p.second, res[1], tol);
        });
        return {ok(any), means};
    }
    }
    return {Verdict::unverifiable, ""};
}

std::vector<std::size_t> hinted_categories(const CategoricalSummary& c, std::string_view clause_text) {
    const auto tokens = tokenize(clause_text);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < c.ordering.size(); ++i) {
        const auto cat_tokens = tokenize(c.ordering[i]);
        if (cat_tokens.empty()) continue;
        for (std::size_t k = 0; k + cat_tokens.size() <= tokens.size(); ++k) {
            bool match = true;
            for (std::size_t m = 0; m < cat_tokens.size() && match; ++m) match = tokens[k + m].text == cat_tokens[m].text;
            if (match) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

ClaimCheck check_categorical(const NumericClaim& claim, const CategoricalSummary& c, std::string_view clause_text,
                             const ValidationOptions& opt) {
    if (c.insufficient()) return {Verdict::unverifiable, "insufficient data for " + c.feature};
    const auto& v = claim.values;
    const auto& res = claim.resolution;
    auto ok = [](bool b) { return b ? Verdict::verified : Verdict::contradicted; };
    if (claim.ks_context) return {ok(close_to(v[0], *c.ks, res[0], opt.tol_rel)), fmt::format("actual KS {:.3f}", *c.ks)};
    if (claim.kind == ClaimKind::range) return {Verdict::unverifiable, "ranges are not defined for categories"};

    auto candidates = hinted_categories(c, clause_text);
    if (candidates.empty()) {
        for (std::size_t i = 0; i < c.ordering.size(); ++i) candidates.push_back(i);
    }
    std::string detail;
    for (std::size_t i : candidates) {
        if (!detail.empty()) detail += "; ";
        detail += fmt::format("{}: {:.1f}% (selected) vs {:.1f}% (rest)", c.ordering[i], 100.0 * c.selected_proportion(i),
                              100.0 * c.rest_proportion(i));
    }
    const double pp = opt.proportion_tolerance_pp;
    // a bare value of at most 1 is read as a fraction, anything else as a percentage
    auto as_pct = [&](std::size_t k) { return claim.kind == ClaimKind::proportion || v[k] > 1.0 ? v[k] : 100.0 * v[k]; };
    auto as_res = [&](std::size_t k) { return claim.kind == ClaimKind::proportion || v[k] > 1.0 ? res[k] : 100.0 * res[k]; };

    for (std::size_t i : candidates) {
        const double sp = c.selected_proportion(i);
        const double rp = c.rest_proportion(i);
        const double sc = static_cast<double>(c.selected_counts[i]);
        const double rc = static_cast<double>(c.rest_counts[i]);
        if (v.size() == 1) {
            if (close_pp(as_pct(0), sp, as_res(0), pp) || close_pp(as_pct(0), rp, as_res(0), pp)) {
                return {Verdict::verified, detail};
            }
            if (claim.kind != ClaimKind::proportion &&
                (close_to(v[0], sc, res[0], opt.tol_rel) || close_to(v[0], rc, res[0], opt.tol_rel))) {
                return {Verdict::verified, detail};
            }
        } else {
            if (close_pp(as_pct(0), sp, as_res(0), pp) && close_pp(as_pct(1), rp, as_res(1), pp)) {
                return {Verdict::verified, detail};
            }
            if (claim.kind != ClaimKind::proportion && close_to(v[0], sc, res[0], opt.tol_rel) &&
                close_to(v[1], rc, res[1], opt.tol_rel)) {
                return {Verdict::verified, detail};
            }
        }
    }
    return {Verdict::contradicted, detail};
}

std::vector<std::string> mentioned_features(std::string_view text, const FeatureLexicon& lexicon,
                                            const ContrastProfile& profile) {
    std::vector<std::string> out;
    for (const auto& m : lexicon.find_mentions(text)) {
        if (profile.find(m.feature) && std::find(out.begin(), out.end(), m.feature) == out.end()) {
            out.push_back(m.feature);
        }
    }
    return out;
}

}  // namespace

// ----- parsing ---------------------------------------------------------------

ParsedExplanation parse_explanation(const std::string& raw_text) {
    ParsedExplanation p;
    p.raw_text = raw_text;
    std::string summary;
    std::size_t pos = 0;
    bool last_was_bullet = false;
    while (pos <= raw_text.size()) {
        std::size_t eol = raw_text.find('\n', pos);
        if (eol == std::string::npos) eol = raw_text.size();
        const std::string_view line(raw_text.data() + pos, eol - pos);
        std::size_t content = 0;
        if (trim(line).empty()) {
            last_was_bullet = false;
        } else if (is_bullet_line(line, content)) {
            p.bullets.push_back(strip_markup(line.substr(content)));
            p.bullet_spans.push_back({pos + content, eol});
            last_was_bullet = true;
        } else if (last_was_bullet && (line.front() == ' ' || line.front() == '\t')) {
            p.bullets.back() += " " + strip_markup(line);
            p.bullet_spans.back().end = eol;
        } else {
            if (!summary.empty()) summary += ' ';
            summary += strip_markup(line);
            last_was_bullet = false;
        }
        if (eol == raw_text.size()) break;
        pos = eol + 1;
    }
    p.summary = summary;

    for (std::string_view marker : {"**", "__"}) {
        std::size_t at = 0;
        while ((at = raw_text.find(marker, at)) != std::string::npos) {
            const std::size_t close = raw_text.find(marker, at + 2);
            if (close == std::string::npos) break;
            const auto term = trim(std::string_view(raw_text).substr(at + 2, close - at - 2));
            if (!term.empty() && term.find('\n') == std::string_view::npos) p.bold_terms.emplace_back(term);
            at = close + 2;
        }
    }

    std::size_t words = 0;
    bool in_word = false;
    bool has_alnum = false;
    for (char c : raw_text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (space) {
            if (in_word && has_alnum) ++words;
            in_word = false;
            has_alnum = false;
        } else {
            in_word = true;
            has_alnum = has_alnum || is_alnum(c);
        }
    }
    if (in_word && has_alnum) ++words;
    p.word_count = words;
    p.format_ok = p.bullets.size() >= kMinBullets && p.bullets.size() <= kMaxBullets && p.word_count < kWordLimit;
    return p;
}

// ----- lexicon ---------------------------------------------------------------

FeatureLexicon::FeatureLexicon(std::span<const std::string> features) {
    for (const auto& f : features) {
        features_.push_back(f);
        add(f, f);
    }
    finalize();
}

FeatureLexicon::FeatureLexicon(const Dataset& dataset) {
    const auto& ctx = dataset.context();
    for (const auto& c : dataset.columns()) {
        features_.push_back(c.name);
        add(c.name, c.name);
        if (auto it = ctx.aliases.find(c.name); it != ctx.aliases.end()) {
            for (const auto& alias : it->second) add(c.name, alias);
        }
        if (auto it = ctx.per_feature.find(c.name); it != ctx.per_feature.end()) {
            const std::string& desc = it->second;
            const auto cut = desc.find_first_of(",;:(.");
            auto lead = tokenize(desc.substr(0, cut));
            while (!lead.empty() && (lead.front().text == "the" || lead.front().text == "a" || lead.front().text == "an")) {
                lead.erase(lead.begin());
            }
            if (lead.size() >= 2 && lead.size() <= 4) {
                std::string phrase;
                for (const auto& t : lead) phrase += t.text + " ";
                add(c.name, phrase);
            }
        }
    }
    finalize();
}

void FeatureLexicon::add(const std::string& feature, const std::string& phrase) {
    const auto tokens = identifier_tokens(phrase);
    if (tokens.empty()) return;
    phrases_.emplace_back(tokens, feature);
    if (tokens.size() > 1) {
        std::string joined;
        for (const auto& t : tokens) joined += t;
        phrases_.push_back({{joined}, feature});
        if (is_unit_token(tokens.back())) phrases_.emplace_back(std::vector<std::string>(tokens.begin(), tokens.end() - 1), feature);
    }
}

void FeatureLexicon::finalize() {
    std::map<std::vector<std::string>, std::set<std::string>> owners;
    for (const auto& [tokens, feature] : phrases_) owners[tokens].insert(feature);
    std::set<std::vector<std::string>> own_names;
    std::map<std::vector<std::string>, std::string> name_owner;
    for (const auto& f : features_) name_owner[identifier_tokens(f)] = f;

    std::vector<std::pair<std::vector<std::string>, std::string>> kept;
    for (const auto& [tokens, feats] : owners) {
        if (feats.size() == 1) kept.emplace_back(tokens, *feats.begin());
        else if (auto it = name_owner.find(tokens); it != name_owner.end()) kept.emplace_back(tokens, it->second);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) { return x.first.size() > y.first.size(); });
    phrases_ = std::move(kept);
}

std::vector<FeatureLexicon::Mention> FeatureLexicon::find_mentions(std::string_view text) const {
    const auto tokens = tokenize(text);
    std::vector<Mention> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        bool found = false;
        for (const auto& [phrase, feature] : phrases_) {
            if (i + phrase.size() > tokens.size()) continue;
            bool match = true;
            for (std::size_t k = 0; k < phrase.size() && match; ++k) {
                const auto& t = tokens[i + k].text;
                const bool last = k + 1 == phrase.size();
                match = t == phrase[k] || (last && phrase[k].size() >= 3 && t == phrase[k] + "s");
            }
            if (match) {
                out.push_back({feature, {tokens[i].span.begin, tokens[i + phrase.size() - 1].span.end}});
                i += phrase.size();
                found = true;
                break;
            }
        }
        if (!found) ++i;
    }
    // "housing loan": a feature name used as a modifier of the next one
    std::vector<Mention> merged;
    for (auto& m : out) {
        if (!merged.empty() && m.span.begin == merged.back().span.end + 1 &&
            (text[merged.back().span.end] == ' ' || text[merged.back().span.end] == '-')) {
            merged.back().span.end = m.span.end;
            continue;
        }
        merged.push_back(std::move(m));
    }
    return merged;
}

// ----- claims ----------------------------------------------------------------

std::string_view to_string(ClaimKind kind) {
    switch (kind) {
    case ClaimKind::mean_like: return "mean-like";
    case ClaimKind::proportion: return "proportion";
    case ClaimKind::range: return "range";
    case ClaimKind::unclassified: return "unclassified";
    }
    return "unclassified";
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::verified: return "verified";
    case Verdict::contradicted: return "contradicted";
    case Verdict::unverifiable: return "unverifiable";
    }
    return "unverifiable";
}

std::vector<NumericClaim> extract_claims(const ParsedExplanation& parsed, const FeatureLexicon& lexicon) {
    static const std::set<std::string, std::less<>> mean_cues = {
        "mean", "means", "average", "averages", "averaging", "avg", "typical", "typically", "median",
        "about", "around", "approximately", "approx", "roughly"};
    static const std::set<std::string, std::less<>> ks_cues = {"ks"};

    const std::string_view text = parsed.raw_text;
    auto numbers = scan_numbers(text);
    // list markers such as "1. " at the start of a line are not claims
    std::erase_if(numbers, [&](const NumberToken& n) {
        std::size_t line_start = n.span.begin;
        while (line_start > 0 && text[line_start - 1] != '\n') --line_start;
        std::size_t content = 0;
        return is_bullet_line(text.substr(line_start, text.find('\n', line_start) - line_start), content) &&
               n.span.begin < line_start + content && !n.percent;
    });
    const auto mentions = lexicon.find_mentions(text);

    std::vector<NumericClaim> claims;
    for (std::size_t i = 0; i < numbers.size(); ++i) {
        NumericClaim claim;
        std::vector<const NumberToken*> group = {&numbers[i]};
        Link link = Link::none;
        if (i + 1 < numbers.size()) link = link_between(text, numbers[i], numbers[i + 1]);
        if (link != Link::none) {
            group.push_back(&numbers[i + 1]);
            ++i;
        }
        bool percent = false;
        for (const auto* n : group) {
            claim.values.push_back(n->value);
            claim.resolution.push_back(n->resolution);
            percent = percent || n->percent;
        }
        claim.span = {group.front()->span.begin, group.back()->span.end};
        claim.clause = enclosing(text, claim.span, false);

        if (has_cue_before(text, claim.clause, claim.span.begin, ks_cues, 2)) {
            claim.ks_context = true;
            claim.kind = ClaimKind::unclassified;
        } else if (percent) {
            claim.kind = ClaimKind::proportion;
        } else if (link == Link::range) {
            claim.kind = ClaimKind::range;
        } else if (link == Link::pair || has_cue_before(text, claim.clause, claim.span.begin, mean_cues, 5) ||
                   approx_sign_before(text, claim.span.begin)) {
            claim.kind = ClaimKind::mean_like;
        }

        // nearest mention in the clause, then in the sentence
        const FeatureLexicon::Mention* best = nullptr;
        std::size_t best_distance = std::string::npos;
        for (const auto& m : mentions) {
            if (m.span.begin < claim.clause.begin || m.span.end > claim.clause.end) continue;
            const std::size_t d = m.span.end <= claim.span.begin ? claim.span.begin - m.span.end
                                                                  : m.span.begin - std::min(m.span.begin, claim.span.end);
            if (d < best_distance || (d == best_distance && m.span.end <= claim.span.begin)) {
                best = &m;
                best_distance = d;
            }
        }
        if (!best) {
            const TextSpan sentence = enclosing(text, claim.span, true);
            for (const auto& m : mentions) {
                if (m.span.begin < sentence.begin || m.span.end > claim.span.begin) continue;
                best = &m;  // keeps the last preceding one
            }
            if (!best) {
                for (const auto& m : mentions) {
                    if (m.span.begin >= claim.span.end && m.span.end <= sentence.end) {
                        best = &m;
                        break;
                    }
                }
            }
        }
        if (best) {
            claim.feature = best->feature;
            claim.matched = true;
        } else {
            // name the claim after the closest bold term or the preceding word
            std::size_t line_begin = claim.span.begin;
            while (line_begin > 0 && text[line_begin - 1] != '\n') --line_begin;
            std::size_t line_end = text.find('\n', claim.span.end);
            if (line_end == std::string::npos) line_end = text.size();
            std::string token;
            std::size_t token_distance = std::string::npos;
            std::size_t at = line_begin;
            while ((at = text.find("**", at)) != std::string::npos && at < line_end) {
                const std::size_t close = text.find("**", at + 2);
                if (close == std::string::npos || close > line_end) break;
                const std::size_t d = close + 2 <= claim.span.begin ? claim.span.begin - (close + 2)
                                                                    : (at >= claim.span.end ? at - claim.span.end : 0);
                const auto term = trim(text.substr(at + 2, close - at - 2));
                if (d < token_distance && !term.empty() && tokenize(term).size() > 0 && scan_numbers(term).empty()) {
                    token = std::string(term);
                    token_distance = d;
                }
                at = close + 2;
            }
            if (token.empty()) {
                const auto before = tokenize(text.substr(line_begin, claim.span.begin - line_begin));
                for (auto it = before.rbegin(); it != before.rend(); ++it) {
                    if (!is_digit(it->text.front())) {
                        token = it->text;
                        break;
                    }
                }
            }
            if (token.empty()) {
                for (const auto& t : tokenize(text.substr(claim.span.end, line_end - claim.span.end))) {
                    if (!is_digit(t.text.front())) {
                        token = t.text;
                        break;
                    }
                }
            }
            claim.feature = token.empty() ? std::string(text.substr(claim.span.begin, claim.span.end - claim.span.begin))
                                          : token;
            claim.matched = false;
        }
        claims.push_back(std::move(claim));
    }
    return claims;
}

std::vector<NumericClaim> extract_claims(const ParsedExplanation& parsed, std::span<const std::string> features) {
    return extract_claims(parsed, FeatureLexicon(features));
}

// ----- validation ------------------------------------------------------------

ValidationReport validate(const Explanation& explanation, const ContrastProfile& profile, const FeatureLexicon& lexicon,
                          const ValidationOptions& options) {
    if (!explanation.mask_id.empty() && explanation.mask_id != profile.mask_id) {
        throw Error(ErrorCode::validation, fmt::format("explanation was produced for mask {} but the profile is for {}",
                                                       explanation.mask_id, profile.mask_id));
    }
    const auto parsed = parse_explanation(explanation.raw_text);
    ValidationReport report;
    report.mask_id = profile.mask_id;
    report.format_ok = parsed.format_ok;
    report.word_count = parsed.word_count;
    report.bullet_count = parsed.bullets.size();

    const double total = static_cast<double>(profile.selected_count + profile.rest_count);
    for (auto& claim : extract_claims(parsed, lexicon)) {
        ClaimVerdict cv;
        const std::string_view clause_text =
            std::string_view(explanation.raw_text).substr(claim.clause.begin, claim.clause.end - claim.clause.begin);
        if (!claim.matched) {
            // sizes of the selection are checkable even without a feature
            bool size_claim = false;
            if (claim.values.size() == 1) {
                const double v = claim.values[0];
                const double r = claim.resolution[0];
                if (claim.kind == ClaimKind::proportion) {
                    size_claim = close_pp(v, profile.selected_count / total, r, options.proportion_tolerance_pp) ||
                                 close_pp(v, profile.rest_count / total, r, options.proportion_tolerance_pp);
                } else {
                    size_claim = std::abs(v - profile.selected_count) <= r || std::abs(v - profile.rest_count) <= r ||
                                 std::abs(v - total) <= r;
                }
            }
            if (size_claim) {
                cv.verdict = Verdict::verified;
                cv.detail = fmt::format("selection size {} of {}", profile.selected_count, total);
            } else {
                cv.verdict = Verdict::unverifiable;
                cv.detail = "no attribute named '" + claim.feature + "' in the dataset";
                if (std::find(report.hallucinated_features.begin(), report.hallucinated_features.end(), claim.feature) ==
                    report.hallucinated_features.end()) {
                    report.hallucinated_features.push_back(claim.feature);
                }
            }
        } else if (const FeatureSummary* s = profile.find(claim.feature)) {
            ClaimCheck check;
            if (const auto* n = std::get_if<NumericalSummary>(s)) check = check_numerical(claim, *n, options);
            else check = check_categorical(claim, std::get<CategoricalSummary>(*s), clause_text, options);
            cv.verdict = check.verdict;
            cv.detail = std::move(check.detail);
        } else {
            cv.verdict = Verdict::unverifiable;
            cv.detail = "attribute '" + claim.feature + "' is not part of the contrast profile";
        }
        cv.claim = std::move(claim);
        switch (cv.verdict) {
        case Verdict::verified: ++report.verified; break;
        case Verdict::contradicted: ++report.contradicted; break;
        case Verdict::unverifiable: ++report.unverifiable; break;
        }
        report.claims.push_back(std::move(cv));
    }

    report.mentioned_features = mentioned_features(explanation.raw_text, lexicon, profile);
    const std::size_t k = std::min(options.top_k, profile.ranking.size());
    report.top_k_features.assign(profile.ranking.begin(), profile.ranking.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t hits = 0;
    for (const auto& f : report.mentioned_features) {
        if (std::find(report.top_k_features.begin(), report.top_k_features.end(), f) != report.top_k_features.end()) ++hits;
    }
    report.mention_precision =
        report.mentioned_features.empty() ? 0.0 : static_cast<double>(hits) / report.mentioned_features.size();
    report.mention_recall = k == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(k);
    return report;
}

ConsistencyMetrics trial_consistency(std::span<const Explanation> explanations, const ContrastProfile& profile,
                                     const FeatureLexicon& lexicon, double tol_rel) {
    if (explanations.size() < 2) {
        throw Error(ErrorCode::arity, fmt::format("trial consistency needs at least 2 trials, got {}", explanations.size()));
    }
    ConsistencyMetrics m;
    m.trials = explanations.size();
    std::vector<std::set<std::string>> mention_sets;
    std::map<std::string, std::vector<std::vector<double>>> first_values;
    std::map<std::string, std::vector<std::vector<double>>> first_resolution;
    for (const auto& e : explanations) {
        const auto mentioned = mentioned_features(e.raw_text, lexicon, profile);
        mention_sets.emplace_back(mentioned.begin(), mentioned.end());
        std::set<std::string> seen;
        for (const auto& c : extract_claims(parse_explanation(e.raw_text), lexicon)) {
            if (!c.matched || !profile.find(c.feature) || !seen.insert(c.feature).second) continue;
            first_values[c.feature].push_back(c.values);
            first_resolution[c.feature].push_back(c.resolution);
        }
    }
    std::set<std::string> all = mention_sets.front();
    std::set<std::string> any;
    for (const auto& s : mention_sets) {
        std::set<std::string> next;
        std::set_intersection(all.begin(), all.end(), s.begin(), s.end(), std::inserter(next, next.begin()));
        all = std::move(next);
        any.insert(s.begin(), s.end());
    }
    m.mention_jaccard = any.empty() ? 1.0 : static_cast<double>(all.size()) / static_cast<double>(any.size());
    // keep profile (dataset) order for readability
    for (const auto& s : profile.summaries) {
        const auto& f = feature_name(s);
        if (all.count(f)) m.features_in_all.push_back(f);
        else if (any.count(f)) m.features_in_some.push_back(f);
    }
    for (const auto& [feature, values] : first_values) {
        if (values.size() < 2) continue;
        FeatureValueConsistency fc;
        fc.feature = feature;
        fc.values_per_trial = values;
        const auto& res = first_resolution[feature];
        for (std::size_t t = 1; t < values.size() && fc.consistent; ++t) {
            if (values[t].size() != values[0].size()) {
                fc.consistent = false;
                break;
            }
            for (std::size_t k = 0; k < values[0].size(); ++k) {
                const double r = std::max(res[0][k], res[t][k]);
                if (!close_to(values[t][k], values[0][k], r, tol_rel)) fc.consistent = false;
            }
        }
        m.values_consistent = m.values_consistent && fc.consistent;
        m.values.push_back(std::move(fc));
    }
    return m;
}

nlohmann::json to_json(const ConsistencyMetrics& m) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : m.values) {
        values.push_back({{"feature", v.feature}, {"consistent", v.consistent}, {"values_per_trial", v.values_per_trial}});
    }
    return {{"trials", m.trials},
            {"mention_jaccard", m.mention_jaccard},
            {"features_in_all", m.features_in_all},
            {"features_in_some", m.features_in_some},
            {"values", std::move(values)},
            {"values_consistent", m.values_consistent}};
}

nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json claims = nlohmann::json::array();
    for (const auto& cv : r.claims) {
        claims.push_back({{"feature", cv.claim.feature},
                          {"matched", cv.claim.matched},
                          {"values", cv.claim.values},
                          {"kind", to_string(cv.claim.kind)},
                          {"span", {cv.claim.span.begin, cv.claim.span.end}},
                          {"clause", {cv.claim.clause.begin, cv.claim.clause.end}},
                          {"verdict", to_string(cv.verdict)},
                          {"detail", cv.detail}});
    }
    nlohmann::json j = {{"mask_id", r.mask_id},
                        {"claims", std::move(claims)},
                        {"counts", {{"verified", r.verified}, {"contradicted", r.contradicted}, {"unverifiable", r.unverifiable}}},
                        {"mentioned_features", r.mentioned_features},
                        {"top_k_features", r.top_k_features},
                        {"mention_precision", r.mention_precision},
                        {"mention_recall", r.mention_recall},
                        {"hallucinated_features", r.hallucinated_features},
                        {"format_ok", r.format_ok},
                        {"word_count", r.word_count},
                        {"bullet_count", r.bullet_count}};
    j["consistency"] = r.consistency ? to_json(*r.consistency) : nlohmann::json(nullptr);
    return j;
}

std::string render_report_table(const ValidationReport& r, std::string_view raw_text) {
    std::string out = fmt::format("format: {} ({} bullets, {} words)\n", r.format_ok ? "ok" : "VIOLATED", r.bullet_count,
                                  r.word_count);
    out += fmt::format("claims: {} verified, {} contradicted, {} unverifiable\n", r.verified, r.contradicted, r.unverifiable);
    out += fmt::format("mentions: precision {:.2f}, recall {:.2f} (top-{})\n", r.mention_precision, r.mention_recall,
                       r.top_k_features.size());
    if (!r.hallucinated_features.empty()) {
        out += "hallucinated:";
        for (const auto& h : r.hallucinated_features) out += " " + h;
        out += '\n';
    }
    out += fmt::format("{:<13} {:<20} {:<13} {}\n", "verdict", "feature", "kind", "text");
    for (const auto& cv : r.claims) {
        std::string snippet;
        if (cv.claim.span.end <= raw_text.size()) {
            snippet = raw_text.substr(cv.claim.span.begin, cv.claim.span.end - cv.claim.span.begin);
        }
        out += fmt::format("{:<13} {:<20} {:<13} {}", to_string(cv.verdict), cv.claim.feature, to_string(cv.claim.kind),
                           snippet);
        if (cv.verdict == Verdict::contradicted) out += "  [" + cv.detail + "]";
        out += '\n';
    }
    return out;
}

}  // namespace lassolens
