#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flood/nn/conv.hpp"
#include "flood/nn/layers.hpp"
#include "flood/nn/tensor.hpp"

namespace flood::nn {

struct ConvStage {
    size_t n_convs = 1;
    size_t channels = 8;
};

// VGG-family layout: stacks of 3x3 convolutions with a 2x2 maxpool after each
// stage, then fully-connected layers. The feature layer is the last FC.
struct VggLayout {
    size_t input_size = 32;
    std::vector<ConvStage> stages;
    std::vector<size_t> fc_dims;
    double fc_dropout = 0.5;

    size_t final_spatial() const { return input_size >> stages.size(); }
    size_t conv_out_elems() const {
        return stages.back().channels * final_spatial() * final_spatial();
    }
    size_t feature_dim() const { return fc_dims.back(); }

    void validate() const {
        if (stages.empty() || fc_dims.empty()) {
            throw ConfigError("vgg layout: stages and fc_dims must be non-empty");
        }
        if (final_spatial() == 0) {
            throw ConfigError("vgg layout: too many pooling stages for the input size");
        }
    }
};

// Full-scale layout matching the canonical 16-layer network: 224x224 input,
// 13 convolutions, two 4096-wide FC layers.
inline VggLayout vgg16_layout() {
    VggLayout l;
    l.input_size = 224;
    l.stages = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
    l.fc_dims = {4096, 4096};
    return l;
}

// Desk-scale layout with the same topology, for tests and synthetic corpora.
inline VggLayout vgg_tiny_layout() {
    VggLayout l;
    l.input_size = 32;
    l.stages = {{1, 6}, {1, 12}};
    l.fc_dims = {64, 64};
    return l;
}

struct ConvLayer {
    Tensor w;  // [out, in, 3, 3]
    Tensor b;  // [out]

    ConvLayer() = default;
    ConvLayer(size_t in, size_t out, Rng& rng) {
        w = make_tensor({out, in, 3, 3}, true);
        b = make_tensor({out}, true);
        init_normal(w, rng, std::sqrt(2.0 / static_cast<double>(in * 9)));
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

struct VggBackbone {
    VggLayout layout;
    std::vector<std::vector<ConvLayer>> conv_stages;
    std::vector<Linear> fcs;

    VggBackbone() = default;
    VggBackbone(const VggLayout& l, Rng& rng) : layout(l) {
        layout.validate();
        size_t in_ch = 3;
        for (const auto& stage : layout.stages) {
            std::vector<ConvLayer> convs;
            for (size_t c = 0; c < stage.n_convs; ++c) {
                convs.emplace_back(in_ch, stage.channels, rng);
                in_ch = stage.channels;
            }
            conv_stages.push_back(std::move(convs));
        }
        size_t in_dim = layout.conv_out_elems();
        for (size_t fc : layout.fc_dims) {
            fcs.emplace_back(in_dim, fc, rng);
            in_dim = fc;
        }
    }

    // x: [N, 3, S, S] -> features [N, feature_dim]
    Tensor forward_features(Tape& tape, Tensor x, Rng& rng, bool train) const {
        for (const auto& stage : conv_stages) {
            for (const auto& conv : stage) {
                x = tape.relu(conv2d(tape, x, conv.w, conv.b));
            }
            x = maxpool2d(tape, x);
        }
        x = flatten(tape, x);
        for (size_t i = 0; i < fcs.size(); ++i) {
            if (i > 0) x = tape.dropout(x, layout.fc_dropout, rng, train);
            x = tape.relu(fcs[i].forward(tape, x));
        }
        return x;
    }

    NamedParams params(const std::string& prefix = "backbone") const {
        NamedParams out;
        for (size_t s = 0; s < conv_stages.size(); ++s) {
            for (size_t c = 0; c < conv_stages[s].size(); ++c) {
                conv_stages[s][c].collect(
                    prefix + ".stage" + std::to_string(s) + ".conv" + std::to_string(c), out);
            }
        }
        for (size_t i = 0; i < fcs.size(); ++i) {
            fcs[i].collect(prefix + ".fc" + std::to_string(i), out);
        }
        return out;
    }
};

// Residual layout: stem convolution, then stages of residual blocks; the
// first block of each stage halves the spatial size. Feature is the global
// average pool of the last stage.
struct ResidualLayout {
    size_t input_size = 32;
    size_t stem_channels = 8;
    std::vector<ConvStage> stages;  // n_convs = residual blocks per stage

    size_t feature_dim() const { return stages.back().channels; }

    void validate() const {
        if (stages.empty()) throw ConfigError("residual layout: stages must be non-empty");
        if ((input_size >> stages.size()) == 0) {
            throw ConfigError("residual layout: too many downsampling stages");
        }
    }
};

// Deep preset mirroring a 152-layer residual network's stage plan; its
// feature width is 2048. Desk-scale work should use residual_tiny_layout.
inline ResidualLayout resnet152_layout() {
    ResidualLayout l;
    l.input_size = 224;
    l.stem_channels = 64;
    l.stages = {{3, 256}, {8, 512}, {36, 1024}, {3, 2048}};
    return l;
}

inline ResidualLayout residual_tiny_layout() {
    ResidualLayout l;
    l.input_size = 32;
    l.stem_channels = 8;
    l.stages = {{1, 16}, {1, 32}};
    return l;
}

struct ResidualBlock {
    ConvLayer conv1, conv2;
    bool has_proj = false;
    Tensor proj_w;  // [out, in, 1, 1]
    Tensor proj_b;
    size_t stride = 1;

    ResidualBlock() = default;
    ResidualBlock(size_t in, size_t out, size_t stride_, Rng& rng)
        : conv1(in, out, rng), conv2(out, out, rng), stride(stride_) {
        if (in != out || stride != 1) {
            has_proj = true;
            proj_w = make_tensor({out, in, 1, 1}, true);
            proj_b = make_tensor({out}, true);
            init_normal(proj_w, rng, std::sqrt(2.0 / static_cast<double>(in)));
        }
    }

    Tensor forward(Tape& tape, const Tensor& x) const {
        Tensor h = tape.relu(conv2d(tape, x, conv1.w, conv1.b, stride, 1));
        h = conv2d(tape, h, conv2.w, conv2.b, 1, 1);
        Tensor shortcut = has_proj ? conv2d(tape, x, proj_w, proj_b, stride, 0) : x;
        return tape.relu(tape.add(h, shortcut));
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        conv1.collect(prefix + ".conv1", out);
        conv2.collect(prefix + ".conv2", out);
        if (has_proj) {
            out.emplace_back(prefix + ".proj.w", proj_w);
            out.emplace_back(prefix + ".proj.b", proj_b);
        }
    }
};

struct ResidualBackbone {
    ResidualLayout layout;
    ConvLayer stem;
    std::vector<std::vector<ResidualBlock>> stages;

    ResidualBackbone() = default;
    ResidualBackbone(const ResidualLayout& l, Rng& rng) : layout(l), stem(3, l.stem_channels, rng) {
        layout.validate();
        size_t in_ch = l.stem_channels;
        for (const auto& stage : l.stages) {
            std::vector<ResidualBlock> blocks;
            for (size_t b = 0; b < stage.n_convs; ++b) {
                blocks.emplace_back(in_ch, stage.channels, b == 0 ? 2 : 1, rng);
                in_ch = stage.channels;
            }
            stages.push_back(std::move(blocks));
        }
    }

    // x: [N, 3, S, S] -> pooled penultimate feature [N, feature_dim]
    Tensor forward_features(Tape& tape, Tensor x) const {
        x = tape.relu(conv2d(tape, x, stem.w, stem.b));
        for (const auto& stage : stages) {
            for (const auto& block : stage) x = block.forward(tape, x);
        }
        return global_avg_pool(tape, x);
    }

    NamedParams params(const std::string& prefix = "residual") const {
        NamedParams out;
        stem.collect(prefix + ".stem", out);
        for (size_t s = 0; s < stages.size(); ++s) {
            for (size_t b = 0; b < stages[s].size(); ++b) {
                stages[s][b].collect(
                    prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b), out);
            }
        }
        return out;
    }
};

}  // namespace flood::nn
