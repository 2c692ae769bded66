#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "flood/common.hpp"
#include "flood/unicode.hpp"

namespace flood {

struct TokenizedText {
    std::vector<int> ids;
    std::vector<int> attention_mask;  // 1 for every real position
};

// Uncased whole-word tokenizer bundled with an encoder. Lowercases ASCII and
// the Latin-1 letters that matter for Italian, splits on whitespace and
// punctuation, and maps out-of-vocabulary words to [UNK].
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;

    Tokenizer() {
        vocab_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
        rebuild_index();
    }

    static std::string lowercase(const std::string& s) {
        std::string out;
        for (const auto& u : utf8_decode(s)) {
            if (!u.valid) {
                out += u.bytes;
                continue;
            }
            uint32_t cp = u.cp;
            if (cp >= 'A' && cp <= 'Z') cp += 32;
            else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) cp += 32;  // Latin-1 uppercase
            utf8_append(out, cp);
        }
        return out;
    }

    static std::vector<std::string> word_split(const std::string& text) {
        std::vector<std::string> words;
        std::string cur;
        auto flush = [&]() {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        };
        for (const auto& u : utf8_decode(lowercase(text))) {
            if (u.valid && u.cp < 0x80) {
                char c = static_cast<char>(u.cp);
                if (std::isspace(static_cast<unsigned char>(c))) {
                    flush();
                    continue;
                }
                if (std::ispunct(static_cast<unsigned char>(c))) {
                    flush();
                    words.push_back(std::string(1, c));
                    continue;
                }
            }
            cur += u.bytes;
        }
        flush();
        return words;
    }

    // [CLS] word ... [SEP], truncated from the right to max_len total ids.
    TokenizedText encode(const std::string& clean_text, size_t max_len) const {
        if (max_len < 2) throw ConfigError("tokenizer: max_len must be >= 2");
        std::vector<int> ids;
        ids.push_back(kCls);
        for (const auto& w : word_split(clean_text)) {
            if (ids.size() + 1 >= max_len) break;  // leave room for [SEP]
            auto it = index_.find(w);
            ids.push_back(it == index_.end() ? kUnk : it->second);
        }
        ids.push_back(kSep);
        TokenizedText out;
        out.ids = std::move(ids);
        out.attention_mask.assign(out.ids.size(), 1);
        return out;
    }

    size_t vocab_size() const { return vocab_.size(); }

    static Tokenizer build_from_texts(const std::vector<std::string>& texts,
                                      size_t max_vocab = 4096) {
        std::map<std::string, size_t> freq;
        for (const auto& t : texts) {
            for (const auto& w : word_split(t)) ++freq[w];
        }
        std::vector<std::pair<size_t, std::string>> ranked;
        ranked.reserve(freq.size());
        for (const auto& [w, n] : freq) ranked.emplace_back(n, w);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        Tokenizer tok;
        for (const auto& [n, w] : ranked) {
            if (tok.vocab_.size() >= max_vocab) break;
            tok.vocab_.push_back(w);
        }
        tok.rebuild_index();
        return tok;
    }

    std::string to_vocab_file() const {
        std::string out;
        for (const auto& w : vocab_) out += w + "\n";
        return out;
    }

    static Tokenizer from_vocab_file(const std::string& content) {
        Tokenizer tok;
        tok.vocab_.clear();
        for (const auto& line : split_string(content, '\n')) {
            if (!line.empty()) tok.vocab_.push_back(line);
        }
        if (tok.vocab_.size() < 4 || tok.vocab_[kPad] != "[PAD]" || tok.vocab_[kUnk] != "[UNK]" ||
            tok.vocab_[kCls] != "[CLS]" || tok.vocab_[kSep] != "[SEP]") {
            throw DataError("vocab file does not start with the four special tokens");
        }
        tok.rebuild_index();
        return tok;
    }

private:
    void rebuild_index() {
        index_.clear();
        for (size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = static_cast<int>(i);
    }

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace flood
