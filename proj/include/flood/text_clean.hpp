#pragma once

#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "flood/unicode.hpp"

namespace flood {

// Tweet cleaning applied before any tokenizer sees the text:
//   - control and format (invisible) code points removed; \n and \t count
//     as whitespace and are normalized to single spaces
//   - URLs removed entirely (http(s)://…, bare t.co/… paths, www.… hosts)
//   - '#' signs stripped, hashtag words kept
//   - '@'-mentions removed when strip_mentions is on (default)
//   - whitespace normalized: no leading/trailing, no double spaces
//
// The pipeline runs to a fixed point so the result is idempotent even on
// adversarial inputs where one removal uncovers another (e.g. an invisible
// character spliced into "http://").

struct CleanOptions {
    bool strip_mentions = true;
};

struct CleanText {
    std::string value;
};

namespace detail {

inline const std::regex& url_regex() {
    static const std::regex re(
        R"((https?://\S*)|(\bwww\.\S+)|(t\.co/\S*))",
        std::regex::icase | std::regex::optimize);
    return re;
}

inline const std::regex& mention_regex() {
    // Mentions are ASCII word runs after '@' at a token start. std::regex has
    // no lookbehind, so the leading boundary char is captured and kept.
    static const std::regex re(R"((^|[^A-Za-z0-9_])@[A-Za-z0-9_]+)",
                               std::regex::optimize);
    return re;
}

inline std::string remove_invisible(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const auto& u : utf8_decode(s)) {
        if (!u.valid) {
            out += u.bytes;
            continue;
        }
        if (u.cp == '\n' || u.cp == '\t') {
            out += ' ';
            continue;
        }
        if (is_control_cp(u.cp) || is_format_cp(u.cp)) continue;
        out += u.bytes;
    }
    return out;
}

inline std::string clean_pass(const std::string& s, const CleanOptions& opt) {
    std::string t = remove_invisible(s);
    t = std::regex_replace(t, url_regex(), "");
    if (opt.strip_mentions) {
        t = std::regex_replace(t, mention_regex(), "$1");
    }
    std::string no_hash;
    no_hash.reserve(t.size());
    for (char c : t) {
        if (c != '#') no_hash += c;
    }
    // collapse whitespace runs, trim ends
    std::string out;
    out.reserve(no_hash.size());
    bool pending_space = false;
    for (char c : no_hash) {
        if (c == ' ') {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

}  // namespace detail

inline CleanText clean(const std::string& raw, const CleanOptions& opt = {}) {
    std::string cur = raw;
    // Each pass only deletes characters, so lengths strictly decrease until
    // the fixed point; the loop bound is a safety net, not a tuning knob.
    for (size_t pass = 0; pass <= raw.size() + 1; ++pass) {
        std::string next = detail::clean_pass(cur, opt);
        if (next == cur) break;
        cur = std::move(next);
    }
    return CleanText{cur};
}

template <typename Records>
std::vector<std::pair<std::string, CleanText>> clean_batch(const Records& records,
                                                           const CleanOptions& opt = {}) {
    std::vector<std::pair<std::string, CleanText>> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.emplace_back(r.tweet_id, clean(r.text, opt));
    }
    return out;
}

}  // namespace flood
