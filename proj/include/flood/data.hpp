#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/common.hpp"

namespace flood {

enum class Label { not_relevant = 0, relevant = 1 };
enum class Split { train, dev, test };

inline std::string to_string(Label l) {
    return l == Label::relevant ? "relevant" : "not_relevant";
}

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

inline Label label_from_string(const std::string& s) {
    if (s == "relevant") return Label::relevant;
    if (s == "not_relevant") return Label::not_relevant;
    throw DataError("unknown label value: \"" + s + "\"");
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw DataError("unknown split value: \"" + s + "\"");
}

struct TweetRecord {
    std::string tweet_id;
    std::string text;                       // raw, unprocessed
    std::optional<std::string> image_path;  // relative to the dataset file
    std::optional<Label> label;             // may be absent for test split
    Split split = Split::train;
    std::optional<std::string> clean_text;  // added by the preprocess stage

    bool operator==(const TweetRecord&) const = default;
};

struct DatasetSplit {
    std::vector<TweetRecord> records;                // sorted by tweet_id
    std::map<Label, size_t> class_counts;            // tally of present labels
    std::filesystem::path base_dir;                  // for resolving image paths

    size_t count(Label l) const {
        auto it = class_counts.find(l);
        return it == class_counts.end() ? 0 : it->second;
    }

    std::filesystem::path resolve_image(const TweetRecord& r) const {
        std::filesystem::path p(*r.image_path);
        if (p.is_absolute()) return p;
        return base_dir / p;
    }

    DatasetSplit filter(Split s) const {
        DatasetSplit out;
        out.base_dir = base_dir;
        for (const auto& r : records) {
            if (r.split == s) out.records.push_back(r);
        }
        out.recount();
        return out;
    }

    void recount() {
        class_counts.clear();
        for (const auto& r : records) {
            if (r.label) ++class_counts[*r.label];
        }
    }
};

enum class DataFormat { jsonl, csv };

namespace detail {

inline bool image_header_ok(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    unsigned char magic[8] = {};
    in.read(reinterpret_cast<char*>(magic), 8);
    if (in.gcount() < 2) return false;
    if (magic[0] == 'P' && magic[1] >= '1' && magic[1] <= '6') return true;     // PNM
    if (magic[0] == 0xFF && magic[1] == 0xD8) return true;                      // JPEG
    if (in.gcount() >= 8 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' &&
        magic[3] == 'G')
        return true;                                                            // PNG
    return false;
}

inline TweetRecord record_from_json(const nlohmann::json& j, size_t row) {
    for (const char* key : {"tweet_id", "text"}) {
        if (!j.contains(key)) {
            throw DataError("row " + std::to_string(row) + ": missing field \"" + key + "\"");
        }
    }
    for (const char* key : {"image_path", "label", "split"}) {
        if (!j.contains(key)) {
            throw DataError("row " + std::to_string(row) + ": missing field \"" + key + "\"");
        }
    }
    TweetRecord r;
    try {
        r.tweet_id = j.at("tweet_id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        if (!j.at("image_path").is_null()) r.image_path = j.at("image_path").get<std::string>();
        if (!j.at("label").is_null()) r.label = label_from_string(j.at("label").get<std::string>());
        r.split = split_from_string(j.at("split").get<std::string>());
        if (j.contains("clean_text") && !j.at("clean_text").is_null()) {
            r.clean_text = j.at("clean_text").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    return r;
}

// RFC 4180 style: quoted fields may contain commas, quotes and newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    size_t i = 0;
    const size_t n = content.size();
    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    while (i < n) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && content[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
            } else {
                field += c;
                ++i;
            }
        } else {
            if (c == '"' && field.empty()) {
                in_quotes = true;
                ++i;
            } else if (c == ',') {
                end_field();
                ++i;
            } else if (c == '\r') {
                ++i;
            } else if (c == '\n') {
                end_row();
                ++i;
            } else {
                field += c;
                ++i;
            }
        }
    }
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    bool needs = s.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace detail

inline DatasetSplit load_dataset(const std::filesystem::path& path,
                                 DataFormat format = DataFormat::jsonl,
                                 bool verify_images = true) {
    if (!std::filesystem::exists(path)) {
        throw DataError("dataset file does not exist: " + path.string());
    }
    DatasetSplit ds;
    ds.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    if (format == DataFormat::jsonl) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open: " + path.string());
        std::string line;
        size_t row = 0;
        while (std::getline(in, line)) {
            ++row;
            if (trim(line).empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw DataError("row " + std::to_string(row) + ": malformed JSON");
            }
            ds.records.push_back(detail::record_from_json(j, row));
        }
    } else {
        auto rows = detail::parse_csv(read_file(path));
        if (rows.empty()) throw DataError("CSV has no header row: " + path.string());
        const auto& header = rows[0];
        std::map<std::string, size_t> col;
        for (size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
        for (const char* key : {"tweet_id", "text", "image_path", "label", "split"}) {
            if (!col.count(key)) {
                throw DataError(std::string("CSV header missing column \"") + key + "\"");
            }
        }
        for (size_t r = 1; r < rows.size(); ++r) {
            const auto& cells = rows[r];
            auto cell = [&](const char* key) -> std::string {
                size_t idx = col.at(key);
                if (idx >= cells.size()) {
                    throw DataError("row " + std::to_string(r) + ": missing field \"" +
                                    key + "\"");
                }
                return cells[idx];
            };
            TweetRecord rec;
            rec.tweet_id = cell("tweet_id");
            if (rec.tweet_id.empty()) {
                throw DataError("row " + std::to_string(r) + ": missing field \"tweet_id\"");
            }
            rec.text = cell("text");
            std::string img = cell("image_path");
            if (!img.empty()) rec.image_path = img;
            std::string lab = cell("label");
            if (!lab.empty()) rec.label = label_from_string(lab);
            rec.split = split_from_string(cell("split"));
            if (col.count("clean_text")) {
                std::string ct = cell("clean_text");
                if (!ct.empty()) rec.clean_text = ct;
            }
            ds.records.push_back(std::move(rec));
        }
    }

    std::set<std::string> seen;
    for (const auto& r : ds.records) {
        if (!seen.insert(r.tweet_id).second) {
            throw DataError("duplicate tweet_id \"" + r.tweet_id + "\"");
        }
        if ((r.split == Split::train || r.split == Split::dev) && !r.label) {
            throw DataError("tweet_id \"" + r.tweet_id + "\": label required for " +
                            to_string(r.split) + " split");
        }
    }
    if (verify_images) {
        std::vector<std::string> bad;
        for (const auto& r : ds.records) {
            if (!r.image_path) continue;
            if (!detail::image_header_ok(ds.resolve_image(r))) bad.push_back(r.tweet_id);
        }
        if (!bad.empty()) {
            std::string ids;
            for (const auto& id : bad) ids += (ids.empty() ? "" : ", ") + id;
            throw DataError("unresolvable image_path for tweet ids: " + ids);
        }
    }
    std::sort(ds.records.begin(), ds.records.end(),
              [](const TweetRecord& a, const TweetRecord& b) { return a.tweet_id < b.tweet_id; });
    ds.recount();
    return ds;
}

inline nlohmann::ordered_json record_to_json(const TweetRecord& r) {
    nlohmann::ordered_json j;
    j["tweet_id"] = r.tweet_id;
    j["text"] = r.text;
    j["image_path"] = r.image_path ? nlohmann::ordered_json(*r.image_path)
                                   : nlohmann::ordered_json(nullptr);
    j["label"] = r.label ? nlohmann::ordered_json(to_string(*r.label))
                         : nlohmann::ordered_json(nullptr);
    j["split"] = to_string(r.split);
    if (r.clean_text) j["clean_text"] = *r.clean_text;
    return j;
}

inline void save_dataset(const DatasetSplit& ds, const std::filesystem::path& path,
                         DataFormat format = DataFormat::jsonl) {
    std::string out;
    if (format == DataFormat::jsonl) {
        for (const auto& r : ds.records) {
            out += record_to_json(r).dump();
            out += "\n";
        }
    } else {
        bool any_clean = false;
        for (const auto& r : ds.records) any_clean |= r.clean_text.has_value();
        out = "tweet_id,text,image_path,label,split";
        if (any_clean) out += ",clean_text";
        out += "\n";
        for (const auto& r : ds.records) {
            out += detail::csv_escape(r.tweet_id) + "," + detail::csv_escape(r.text) + "," +
                   detail::csv_escape(r.image_path.value_or("")) + "," +
                   (r.label ? to_string(*r.label) : "") + "," + to_string(r.split);
            if (any_clean) out += "," + detail::csv_escape(r.clean_text.value_or(""));
            out += "\n";
        }
    }
    write_file_atomic(path, out);
}

}  // namespace flood
