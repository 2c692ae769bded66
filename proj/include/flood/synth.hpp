#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "flood/common.hpp"
#include "flood/data.hpp"
#include "flood/image_io.hpp"
#include "flood/rng.hpp"

namespace flood {

// Desk-scale corpus generator. Texts mix two disjoint vocabulary pools and
// images mix two blob families; the separability parameters control how often
// a record draws from its own class pool (1.0 = fully separable, 0.0 = no
// signal). Generation is bit-reproducible: pixel synthesis is pure integer
// arithmetic and text synthesis uses only the seeded generator.
struct SyntheticCorpusSpec {
    size_t n_relevant = 0;
    size_t n_irrelevant = 0;
    double text_vocab_separability = 1.0;
    double image_blob_separability = 1.0;
    uint64_t rng_seed = 0;
    double train_frac = 2.0 / 3.0;
    double dev_frac = 1.0 / 3.0;  // remainder goes to test
    int image_size = 32;

    void validate() const {
        if (text_vocab_separability < 0.0 || text_vocab_separability > 1.0 ||
            image_blob_separability < 0.0 || image_blob_separability > 1.0) {
            throw ConfigError("separability parameters must lie in [0, 1]");
        }
        if (train_frac < 0.0 || dev_frac < 0.0 || train_frac + dev_frac > 1.0 + 1e-9) {
            throw ConfigError("train/dev fractions must be non-negative and sum to <= 1");
        }
        if (image_size < 8 || image_size > 512) {
            throw ConfigError("image_size out of range [8, 512]");
        }
    }
};

namespace detail {

inline const std::vector<std::string>& relevant_pool() {
    static const std::vector<std::string> pool = {
        "alluvione", "allagamento", "esondazione", "piena",       "fiume",
        "argine",    "nubifragio",  "evacuazione", "straripato",  "inondazione",
        "torrente",  "sottopasso",  "fango",       "sommersa",    "maltempo",
    };
    return pool;
}

inline const std::vector<std::string>& irrelevant_pool() {
    static const std::vector<std::string> pool = {
        "calcio",  "partita", "concerto", "ricetta", "moda",
        "vacanze", "cinema",  "musica",   "gatto",   "scuola",
        "libro",   "arte",    "mercato",  "derby",   "estate",
    };
    return pool;
}

inline std::string synth_text(Rng& rng, bool relevant, double separability) {
    const double p_own = 0.5 + 0.5 * separability;
    const size_t n_tokens = 5 + rng.next_below(6);
    std::string text;
    for (size_t t = 0; t < n_tokens; ++t) {
        bool own = rng.next_double() < p_own;
        const auto& pool = (own == relevant) ? relevant_pool() : irrelevant_pool();
        std::string word = pool[rng.next_below(pool.size())];
        if (!text.empty()) text += " ";
        if (rng.next_below(100) < 30) text += "#";  // hashtags survive cleaning as words
        text += word;
    }
    // class-neutral decorations removed by the cleaner
    if (rng.next_below(100) < 40) {
        text += " http://t.co/" + std::to_string(rng.next_below(100000));
    }
    if (rng.next_below(100) < 25) {
        text += " @utente" + std::to_string(rng.next_below(1000));
    }
    return text;
}

// Two blob families distinguishable by channel statistics and stripe
// orientation. All integer arithmetic.
inline Image synth_image(Rng& rng, bool family_a, int size) {
    Image img;
    img.width = size;
    img.height = size;
    img.rgb.resize(static_cast<size_t>(size) * size * 3);
    int base_r, base_g, base_b;
    if (family_a) {  // water-like: blue dominant, horizontal bands
        base_r = 30 + static_cast<int>(rng.next_below(40));
        base_g = 70 + static_cast<int>(rng.next_below(50));
        base_b = 150 + static_cast<int>(rng.next_below(60));
    } else {  // warm/green: red+green dominant, vertical bands
        base_r = 130 + static_cast<int>(rng.next_below(60));
        base_g = 120 + static_cast<int>(rng.next_below(60));
        base_b = 30 + static_cast<int>(rng.next_below(40));
    }
    const int band = 4 + static_cast<int>(rng.next_below(4));
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int stripe_coord = family_a ? y : x;
            int mod = ((stripe_coord / band) % 2 == 0) ? 18 : -18;
            int noise = static_cast<int>(rng.next_below(21)) - 10;
            auto clamp8 = [](int v) { return static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v)); };
            uint8_t* px = img.pixel(x, y);
            px[0] = clamp8(base_r + mod + noise);
            px[1] = clamp8(base_g + mod + noise);
            px[2] = clamp8(base_b - mod + noise);
        }
    }
    return img;
}

inline size_t rounded_count(size_t n, double frac) {
    double v = static_cast<double>(n) * frac;
    return static_cast<size_t>(v + 0.5);
}

}  // namespace detail

inline DatasetSplit generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                              const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory: " + out_dir.string());
    }
    {
        std::ofstream probe(out_dir / ".write_probe", std::ios::trunc);
        if (!probe) throw IoError("output directory not writable: " + out_dir.string());
    }
    std::filesystem::remove(out_dir / ".write_probe", ec);

    const size_t total = spec.n_relevant + spec.n_irrelevant;
    DatasetSplit ds;
    ds.base_dir = out_dir;

    // split boundaries computed per class so each split keeps the class mix
    auto split_of = [&](size_t class_index, size_t class_total) {
        size_t n_train = detail::rounded_count(class_total, spec.train_frac);
        size_t n_dev = detail::rounded_count(class_total, spec.dev_frac);
        if (n_train + n_dev > class_total) n_dev = class_total - n_train;
        if (class_index < n_train) return Split::train;
        if (class_index < n_train + n_dev) return Split::dev;
        return Split::test;
    };

    size_t idx_rel = 0, idx_irr = 0;
    int id_width = 1;
    for (size_t v = total; v >= 10; v /= 10) ++id_width;

    for (size_t i = 0; i < total; ++i) {
        const bool relevant = i < spec.n_relevant;
        TweetRecord r;
        std::string num = std::to_string(i);
        r.tweet_id = "t" + std::string(id_width - num.size(), '0') + num;
        r.label = relevant ? Label::relevant : Label::not_relevant;
        r.split = relevant ? split_of(idx_rel++, spec.n_relevant)
                           : split_of(idx_irr++, spec.n_irrelevant);

        Rng text_rng(Rng::derive(spec.rng_seed, 2 * i));
        r.text = detail::synth_text(text_rng, relevant, spec.text_vocab_separability);

        Rng image_rng(Rng::derive(spec.rng_seed, 2 * i + 1));
        bool own_family = image_rng.next_double() < 0.5 + 0.5 * spec.image_blob_separability;
        Image img = detail::synth_image(image_rng, own_family == relevant, spec.image_size);
        std::string rel_path = "images/" + r.tweet_id + ".ppm";
        save_ppm(img, out_dir / rel_path);
        r.image_path = rel_path;

        ds.records.push_back(std::move(r));
    }
    ds.recount();

    save_dataset(ds, out_dir / "manifest.jsonl");
    save_dataset(ds.filter(Split::train), out_dir / "train.jsonl");
    save_dataset(ds.filter(Split::dev), out_dir / "dev.jsonl");
    save_dataset(ds.filter(Split::test), out_dir / "test.jsonl");
    return ds;
}

}  // namespace flood
