#include "biaslens/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/rng.hpp"

namespace biaslens::net {

using nlohmann::json;

// --- shapes ------------------------------------------------------------------

namespace {

struct BlockDims {
    int in_c, in_h, in_w;  // block input
    int filters;
    int out_h, out_w;  // after 2x2/2 pool
};

struct NetDims {
    std::vector<BlockDims> blocks;
    int flat = 0;  // features entering the FC stack
    std::vector<int> fc_in;
    std::vector<int> fc_out;
};

NetDims compute_dims(const ArchSpec& arch) {
    NetDims d;
    int c = arch.input_channels, h = arch.input_h, w = arch.input_w;
    for (const int f : arch.conv_filters) {
        d.blocks.push_back({c, h, w, f, h / 2, w / 2});
        c = f;
        h /= 2;
        w /= 2;
    }
    d.flat = c * h * w;
    int in = d.flat;
    for (const int width : arch.fc_widths) {
        d.fc_in.push_back(in);
        d.fc_out.push_back(width);
        in = width;
    }
    return d;
}

size_t conv_w_index(size_t block) { return 2 * block; }
size_t conv_b_index(size_t block) { return 2 * block + 1; }
size_t fc_w_index(const ArchSpec& a, size_t layer) {
    return 2 * a.conv_filters.size() + 2 * layer;
}
size_t fc_b_index(const ArchSpec& a, size_t layer) {
    return 2 * a.conv_filters.size() + 2 * layer + 1;
}

std::vector<size_t> tensor_sizes(const ArchSpec& arch) {
    const NetDims d = compute_dims(arch);
    std::vector<size_t> sizes;
    for (const auto& b : d.blocks) {
        sizes.push_back(static_cast<size_t>(b.filters) * b.in_c * 9);
        sizes.push_back(static_cast<size_t>(b.filters));
    }
    for (size_t l = 0; l < d.fc_in.size(); ++l) {
        sizes.push_back(static_cast<size_t>(d.fc_out[l]) * d.fc_in[l]);
        sizes.push_back(static_cast<size_t>(d.fc_out[l]));
    }
    return sizes;
}

void zero_like(const ArchSpec& arch, Params& p) {
    const auto sizes = tensor_sizes(arch);
    p.tensors.resize(sizes.size());
    for (size_t i = 0; i < sizes.size(); ++i) {
        p.tensors[i].assign(sizes[i], 0.0);
    }
}

}  // namespace

void validate_arch(const ArchSpec& arch) {
    if (arch.input_h < 1 || arch.input_w < 1)
        throw ParameterError("arch input size must be positive");
    if (arch.input_channels != 1)
        throw ParameterError("arch input_channels must be 1");
    if (arch.num_classes < 2)
        throw ParameterError("arch num_classes must be >= 2");
    if (arch.fc_widths.empty())
        throw ParameterError("arch needs at least the final FC layer");
    for (const int f : arch.conv_filters)
        if (f < 1) throw ParameterError("conv filter counts must be >= 1");
    for (const int w : arch.fc_widths)
        if (w < 1) throw ParameterError("fc widths must be >= 1");
    if (arch.fc_widths.back() != arch.num_classes)
        throw ParameterError("final FC width " + std::to_string(arch.fc_widths.back()) +
                             " must equal num_classes " +
                             std::to_string(arch.num_classes));
    const int b = static_cast<int>(arch.conv_filters.size());
    if (b > 0) {
        if (arch.input_h % (1 << b) != 0 || arch.input_w % (1 << b) != 0 ||
            (arch.input_h >> b) < 1 || (arch.input_w >> b) < 1)
            throw ParameterError(
                "input size " + std::to_string(arch.input_h) + "x" +
                std::to_string(arch.input_w) + " cannot be halved by " +
                std::to_string(b) + " pooling stages");
    }
}

json arch_to_json(const ArchSpec& arch) {
    return json{{"input_size", {arch.input_h, arch.input_w}},
                {"input_channels", arch.input_channels},
                {"blocks", arch.conv_filters},
                {"fc_widths", arch.fc_widths},
                {"num_classes", arch.num_classes}};
}

ArchSpec arch_from_json(const json& j) {
    ArchSpec a;
    const auto size = j.at("input_size");
    a.input_h = size.at(0).get<int>();
    a.input_w = size.at(1).get<int>();
    a.input_channels = j.value("input_channels", 1);
    a.conv_filters = j.at("blocks").get<std::vector<int>>();
    a.fc_widths = j.at("fc_widths").get<std::vector<int>>();
    a.num_classes = j.at("num_classes").get<int>();
    validate_arch(a);
    return a;
}

ArchSpec default_arch(int num_classes) {
    ArchSpec a;
    a.input_h = a.input_w = 64;
    a.conv_filters = {16, 32, 64};
    a.fc_widths = {128, num_classes};
    a.num_classes = num_classes;
    validate_arch(a);
    return a;
}

void validate_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0)) throw ParameterError("learning_rate must be > 0");
    if (!(cfg.rho > 0 && cfg.rho < 1)) throw ParameterError("rho must be in (0,1)");
    if (!(cfg.epsilon > 0)) throw ParameterError("epsilon must be > 0");
    if (cfg.epochs < 1) throw ParameterError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ParameterError("batch_size must be >= 1");
}

json config_to_json(const TrainConfig& cfg) {
    return json{{"learning_rate", cfg.learning_rate}, {"rho", cfg.rho},
                {"epsilon", cfg.epsilon},             {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},       {"seed", cfg.seed},
                {"shuffle", cfg.shuffle}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.rho = j.value("rho", c.rho);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.shuffle = j.value("shuffle", c.shuffle);
    validate_config(c);
    return c;
}

// --- init ----------------------------------------------------------------------

Params init_params(const ArchSpec& arch, uint64_t seed) {
    validate_arch(arch);
    const NetDims d = compute_dims(arch);
    Params p;
    zero_like(arch, p);
    SplitMix64 rng(seed);
    for (size_t b = 0; b < d.blocks.size(); ++b) {
        const double std_dev = std::sqrt(2.0 / (d.blocks[b].in_c * 9));
        for (double& v : p.tensors[conv_w_index(b)]) v = rng.next_normal() * std_dev;
    }
    // He for hidden FC layers; the final linear head starts at zero so a
    // fresh model emits uniform logits (initial loss is exactly ln C).
    for (size_t l = 0; l + 1 < d.fc_in.size(); ++l) {
        const double std_dev = std::sqrt(2.0 / d.fc_in[l]);
        for (double& v : p.tensors[fc_w_index(arch, l)]) v = rng.next_normal() * std_dev;
    }
    return p;
}

// --- forward/backward kernels ----------------------------------------------------

namespace {

// z[f][y][x] = bias[f] + sum_{c,ky,kx} W[f][c][ky][kx] * in[c][y+ky-1][x+kx-1]
void conv3x3_forward(const double* in, int in_c, int h, int w, const double* weights,
                     const double* bias, int filters, double* z) {
    for (int o = 0; o < filters; ++o) {
        double* zplane = z + static_cast<size_t>(o) * h * w;
        std::fill(zplane, zplane + static_cast<size_t>(h) * w, bias[o]);
        for (int c = 0; c < in_c; ++c) {
            const double* xplane = in + static_cast<size_t>(c) * h * w;
            const double* wk = weights + (static_cast<size_t>(o) * in_c + c) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy = ky - 1;
                const int y0 = std::max(0, -oy);
                const int y1 = std::min(h, h - oy);
                for (int y = y0; y < y1; ++y) {
                    const double* xrow = xplane + static_cast<size_t>(y + oy) * w;
                    double* zrow = zplane + static_cast<size_t>(y) * w;
                    for (int kx = 0; kx < 3; ++kx) {
                        const double wv = wk[ky * 3 + kx];
                        const int ox = kx - 1;
                        const int x0 = std::max(0, -ox);
                        const int x1 = std::min(w, w - ox);
                        const double* xr = xrow + ox;
                        for (int x = x0; x < x1; ++x) zrow[x] += wv * xr[x];
                    }
                }
            }
        }
    }
}

// dW, db, and (optionally) dIn for the same convolution.
void conv3x3_backward(const double* in, int in_c, int h, int w, const double* weights,
                      int filters, const double* dz, double* dw, double* db,
                      double* din) {
    for (int o = 0; o < filters; ++o) {
        const double* dzplane = dz + static_cast<size_t>(o) * h * w;
        double acc = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) acc += dzplane[i];
        db[o] += acc;

        for (int c = 0; c < in_c; ++c) {
            const double* xplane = in + static_cast<size_t>(c) * h * w;
            double* dwk = dw + (static_cast<size_t>(o) * in_c + c) * 9;
            const double* wk = weights + (static_cast<size_t>(o) * in_c + c) * 9;
            double* dxplane = din ? din + static_cast<size_t>(c) * h * w : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy = ky - 1;
                const int y0 = std::max(0, -oy);
                const int y1 = std::min(h, h - oy);
                for (int y = y0; y < y1; ++y) {
                    const double* xrow = xplane + static_cast<size_t>(y + oy) * w;
                    const double* dzrow = dzplane + static_cast<size_t>(y) * w;
                    double* dxrow =
                        dxplane ? dxplane + static_cast<size_t>(y + oy) * w : nullptr;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ox = kx - 1;
                        const int x0 = std::max(0, -ox);
                        const int x1 = std::min(w, w - ox);
                        const double* xr = xrow + ox;
                        double wgrad = 0.0;
                        for (int x = x0; x < x1; ++x) wgrad += xr[x] * dzrow[x];
                        dwk[ky * 3 + kx] += wgrad;
                        if (dxrow) {
                            const double wv = wk[ky * 3 + kx];
                            double* dxr = dxrow + ox;
                            for (int x = x0; x < x1; ++x) dxr[x] += wv * dzrow[x];
                        }
                    }
                }
            }
        }
    }
}

// ReLU then 2x2/2 max-pool; argmax records the winning index per output cell.
void relu_pool_forward(const double* z, int filters, int h, int w, double* out,
                       int* argmax) {
    const int oh = h / 2, ow = w / 2;
    for (int o = 0; o < filters; ++o) {
        const double* zplane = z + static_cast<size_t>(o) * h * w;
        double* pplane = out + static_cast<size_t>(o) * oh * ow;
        int* aplane = argmax + static_cast<size_t>(o) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double best = -1.0;
                int best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * y + dy) * w + (2 * x + dx);
                        const double v = zplane[idx] > 0.0 ? zplane[idx] : 0.0;
                        if (v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                pplane[y * ow + x] = best;
                aplane[y * ow + x] = best_idx;
            }
        }
    }
}

void relu_pool_backward(const double* z, const int* argmax, int filters, int h, int w,
                        const double* dpool, double* dz) {
    const int oh = h / 2, ow = w / 2;
    std::fill(dz, dz + static_cast<size_t>(filters) * h * w, 0.0);
    for (int o = 0; o < filters; ++o) {
        const double* zplane = z + static_cast<size_t>(o) * h * w;
        double* dzplane = dz + static_cast<size_t>(o) * h * w;
        const double* dpplane = dpool + static_cast<size_t>(o) * oh * ow;
        const int* aplane = argmax + static_cast<size_t>(o) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) {
            const int idx = aplane[i];
            if (zplane[idx] > 0.0) dzplane[idx] += dpplane[i];
        }
    }
}

struct Workspace {
    std::vector<std::vector<double>> conv_z;   // pre-activation per block
    std::vector<std::vector<double>> pooled;   // relu+pool output per block
    std::vector<std::vector<int>> argmax;      // pool winners per block
    std::vector<std::vector<double>> fc_pre;   // pre-activation per FC layer
    std::vector<std::vector<double>> fc_post;  // post-relu (last layer: logits)

    void prepare(const NetDims& d) {
        conv_z.resize(d.blocks.size());
        pooled.resize(d.blocks.size());
        argmax.resize(d.blocks.size());
        for (size_t b = 0; b < d.blocks.size(); ++b) {
            const auto& blk = d.blocks[b];
            conv_z[b].resize(static_cast<size_t>(blk.filters) * blk.in_h * blk.in_w);
            pooled[b].resize(static_cast<size_t>(blk.filters) * blk.out_h * blk.out_w);
            argmax[b].resize(pooled[b].size());
        }
        fc_pre.resize(d.fc_in.size());
        fc_post.resize(d.fc_in.size());
        for (size_t l = 0; l < d.fc_in.size(); ++l) {
            fc_pre[l].resize(static_cast<size_t>(d.fc_out[l]));
            fc_post[l].resize(static_cast<size_t>(d.fc_out[l]));
        }
    }
};

// Runs the full forward pass; logits land in ws.fc_pre.back().
void forward_pass(const ArchSpec& arch, const NetDims& d, const Params& params,
                  std::span<const double> img, Workspace& ws) {
    const double* cur = img.data();
    for (size_t b = 0; b < d.blocks.size(); ++b) {
        const auto& blk = d.blocks[b];
        conv3x3_forward(cur, blk.in_c, blk.in_h, blk.in_w,
                        params.tensors[conv_w_index(b)].data(),
                        params.tensors[conv_b_index(b)].data(), blk.filters,
                        ws.conv_z[b].data());
        relu_pool_forward(ws.conv_z[b].data(), blk.filters, blk.in_h, blk.in_w,
                          ws.pooled[b].data(), ws.argmax[b].data());
        cur = ws.pooled[b].data();
    }
    for (size_t l = 0; l < d.fc_in.size(); ++l) {
        const double* w = params.tensors[fc_w_index(arch, l)].data();
        const double* bias = params.tensors[fc_b_index(arch, l)].data();
        const int in_n = d.fc_in[l], out_n = d.fc_out[l];
        for (int o = 0; o < out_n; ++o) {
            const double* wrow = w + static_cast<size_t>(o) * in_n;
            double acc = bias[o];
            for (int i = 0; i < in_n; ++i) acc += wrow[i] * cur[i];
            ws.fc_pre[l][o] = acc;
        }
        if (l + 1 < d.fc_in.size()) {
            for (int o = 0; o < out_n; ++o)
                ws.fc_post[l][o] = ws.fc_pre[l][o] > 0.0 ? ws.fc_pre[l][o] : 0.0;
            cur = ws.fc_post[l].data();
        }
    }
}

int argmax_low_tie(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double logsumexp(std::span<const double> v) {
    double m = v[0];
    for (const double x : v) m = std::max(m, x);
    double s = 0.0;
    for (const double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void check_example_shape(const ArchSpec& arch, const ExampleSet& data,
                         const char* what) {
    if (data.height != arch.input_h || data.width != arch.input_w)
        throw ShapeError(std::string(what) + " examples are " +
                         std::to_string(data.height) + "x" + std::to_string(data.width) +
                         " but the network input is " + std::to_string(arch.input_h) +
                         "x" + std::to_string(arch.input_w));
    if (data.images.size() != data.labels.size())
        throw ShapeError(std::string(what) + " image/label count mismatch");
}

}  // namespace

std::vector<double> forward_logits(const ArchSpec& arch, const Params& params,
                                   std::span<const double> img) {
    const NetDims d = compute_dims(arch);
    if (img.size() != static_cast<size_t>(arch.input_h) * arch.input_w)
        throw ShapeError("input has " + std::to_string(img.size()) +
                         " values, expected " +
                         std::to_string(arch.input_h * arch.input_w) +
                         " at the input layer");
    Workspace ws;
    ws.prepare(d);
    forward_pass(arch, d, params, img, ws);
    return ws.fc_pre.back();
}

std::vector<double> softmax(std::span<const double> logits) {
    const double lse = logsumexp(logits);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
    return out;
}

double loss_and_grads(const ArchSpec& arch, const Params& params,
                      const ExampleSet& data, std::span<const size_t> batch,
                      Params& grads, std::vector<int>* predictions) {
    const NetDims d = compute_dims(arch);
    check_example_shape(arch, data, "batch");
    if (batch.empty()) throw ParameterError("empty batch");
    for (const size_t idx : batch)
        if (data.labels[idx] < 0 || data.labels[idx] >= arch.num_classes)
            throw DatasetError("label " + std::to_string(data.labels[idx]) +
                               " out of range for " + std::to_string(arch.num_classes) +
                               " classes");

    zero_like(arch, grads);
    if (predictions) predictions->clear();

    Workspace ws;
    ws.prepare(d);
    const size_t num_blocks = d.blocks.size();
    const size_t num_fc = d.fc_in.size();

    // Scratch gradient buffers, sized once.
    std::vector<std::vector<double>> d_fc(num_fc);
    for (size_t l = 0; l < num_fc; ++l) d_fc[l].resize(d.fc_out[l]);
    std::vector<double> d_flat(static_cast<size_t>(d.flat));
    std::vector<std::vector<double>> d_pool(num_blocks), d_conv(num_blocks);
    for (size_t b = 0; b < num_blocks; ++b) {
        d_pool[b].resize(ws.pooled[b].size());
        d_conv[b].resize(ws.conv_z[b].size());
    }

    double total_loss = 0.0;
    for (const size_t item : batch) {
        const auto& img = data.images[item];
        const int label = data.labels[item];
        forward_pass(arch, d, params, img, ws);

        const auto& logits = ws.fc_pre.back();
        const double lse = logsumexp(logits);
        total_loss += lse - logits[label];
        if (predictions) predictions->push_back(argmax_low_tie(logits));

        // d(loss)/d(logit_j) = softmax_j - [j == label]
        auto& dlast = d_fc[num_fc - 1];
        for (int j = 0; j < arch.num_classes; ++j)
            dlast[j] = std::exp(logits[j] - lse) - (j == label ? 1.0 : 0.0);

        for (size_t l = num_fc; l-- > 0;) {
            const double* src = l == 0
                                    ? (num_blocks ? ws.pooled[num_blocks - 1].data()
                                                  : img.data())
                                    : ws.fc_post[l - 1].data();
            const int in_n = d.fc_in[l], out_n = d.fc_out[l];
            double* dw = grads.tensors[fc_w_index(arch, l)].data();
            double* db = grads.tensors[fc_b_index(arch, l)].data();
            const double* w = params.tensors[fc_w_index(arch, l)].data();
            const auto& dout = d_fc[l];

            double* dprev = l == 0 ? d_flat.data() : d_fc[l - 1].data();
            std::fill(dprev, dprev + in_n, 0.0);
            for (int o = 0; o < out_n; ++o) {
                const double g = dout[o];
                db[o] += g;
                double* dwrow = dw + static_cast<size_t>(o) * in_n;
                const double* wrow = w + static_cast<size_t>(o) * in_n;
                for (int i = 0; i < in_n; ++i) {
                    dwrow[i] += g * src[i];
                    dprev[i] += g * wrow[i];
                }
            }
            if (l > 0) {
                // ReLU mask of the previous layer's pre-activation.
                for (int i = 0; i < in_n; ++i)
                    if (ws.fc_pre[l - 1][i] <= 0.0) dprev[i] = 0.0;
            }
        }

        if (num_blocks) {
            std::copy(d_flat.begin(), d_flat.end(), d_pool[num_blocks - 1].begin());
            for (size_t b = num_blocks; b-- > 0;) {
                const auto& blk = d.blocks[b];
                relu_pool_backward(ws.conv_z[b].data(), ws.argmax[b].data(), blk.filters,
                                   blk.in_h, blk.in_w, d_pool[b].data(),
                                   d_conv[b].data());
                const double* block_in =
                    b == 0 ? img.data() : ws.pooled[b - 1].data();
                double* din = b == 0 ? nullptr : d_pool[b - 1].data();
                if (din) std::fill(din, din + ws.pooled[b - 1].size(), 0.0);
                conv3x3_backward(block_in, blk.in_c, blk.in_h, blk.in_w,
                                 params.tensors[conv_w_index(b)].data(), blk.filters,
                                 d_conv[b].data(),
                                 grads.tensors[conv_w_index(b)].data(),
                                 grads.tensors[conv_b_index(b)].data(), din);
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& t : grads.tensors)
        for (double& v : t) v *= inv;
    return total_loss * inv;
}

void rmsprop_step(Params& params, const Params& grads, RmspropState& state,
                  const TrainConfig& cfg) {
    if (params.tensors.size() != grads.tensors.size())
        throw ShapeError("rmsprop: parameter/gradient tensor count mismatch");
    if (state.sq_avg.size() != params.tensors.size()) {
        state.sq_avg.resize(params.tensors.size());
        for (size_t t = 0; t < params.tensors.size(); ++t)
            state.sq_avg[t].assign(params.tensors[t].size(), 0.0);
    }
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        if (params.tensors[t].size() != grads.tensors[t].size())
            throw ShapeError("rmsprop: tensor " + std::to_string(t) + " shape mismatch");
        auto& theta = params.tensors[t];
        const auto& g = grads.tensors[t];
        auto& s = state.sq_avg[t];
        for (size_t i = 0; i < theta.size(); ++i) {
            s[i] = cfg.rho * s[i] + (1.0 - cfg.rho) * g[i] * g[i];
            theta[i] -= cfg.learning_rate * g[i] / (std::sqrt(s[i]) + cfg.epsilon);
        }
    }
}

TrainedModel train(const ExampleSet& train_set, const ExampleSet& val_set,
                   const ArchSpec& arch, const TrainConfig& cfg) {
    validate_arch(arch);
    validate_config(cfg);
    check_example_shape(arch, train_set, "train");
    check_example_shape(arch, val_set, "val");
    if (train_set.size() == 0) throw DatasetError("train split is empty");
    if (val_set.size() == 0) throw DatasetError("val split is empty");

    std::vector<int> class_seen(arch.num_classes, 0);
    for (const int label : train_set.labels) {
        if (label < 0 || label >= arch.num_classes)
            throw DatasetError("train label " + std::to_string(label) + " out of range");
        class_seen[label] = 1;
    }
    for (int c = 0; c < arch.num_classes; ++c)
        if (!class_seen[c])
            throw DatasetError("class " + std::to_string(c) + " absent from train split");

    TrainedModel model;
    model.arch = arch;
    model.params = init_params(arch, cfg.seed);

    RmspropState state;
    Params grads;
    // Distinct stream from weight init so shuffling and init never share draws.
    SplitMix64 shuffle_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<int> batch_preds;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) fisher_yates_shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        size_t correct = 0;
        size_t cursor = 0;
        int batch_index = 0;
        while (cursor < order.size()) {
            const size_t take =
                std::min(static_cast<size_t>(cfg.batch_size), order.size() - cursor);
            const std::span<const size_t> batch(&order[cursor], take);
            const double loss =
                loss_and_grads(arch, model.params, train_set, batch, grads, &batch_preds);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite loss at epoch " +
                                     std::to_string(epoch + 1) + ", batch " +
                                     std::to_string(batch_index + 1));
            rmsprop_step(model.params, grads, state, cfg);

            loss_sum += loss * static_cast<double>(take);
            for (size_t i = 0; i < take; ++i)
                if (batch_preds[i] == train_set.labels[batch[i]]) ++correct;
            cursor += take;
            ++batch_index;
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(train_set.size());
        stats.train_acc = static_cast<double>(correct) / train_set.size();
        stats.val_acc = evaluate(model, val_set).accuracy;
        model.history.push_back(stats);
    }
    return model;
}

Metrics evaluate(const TrainedModel& model, const ExampleSet& data) {
    check_example_shape(model.arch, data, "eval");
    const NetDims d = compute_dims(model.arch);
    Workspace ws;
    ws.prepare(d);

    Metrics m;
    m.n = static_cast<int>(data.size());
    m.confusion.assign(static_cast<size_t>(model.arch.num_classes) *
                           model.arch.num_classes,
                       0);
    int correct = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        forward_pass(model.arch, d, model.params, data.images[i], ws);
        const int pred = argmax_low_tie(ws.fc_pre.back());
        const int truth = data.labels[i];
        ++m.confusion[static_cast<size_t>(truth) * model.arch.num_classes + pred];
        if (pred == truth) ++correct;
    }
    m.accuracy = data.size() ? static_cast<double>(correct) / data.size() : 0.0;
    return m;
}

std::vector<double> predict_probs(const TrainedModel& model,
                                  const image::ImageTensor& img) {
    const auto gray = image::to_grayscale(img);
    const auto sized = image::resize(gray, model.arch.input_h, model.arch.input_w);
    const auto logits = forward_logits(model.arch, model.params, sized.data);
    return softmax(logits);
}

int ensemble_predict(const std::vector<const TrainedModel*>& models,
                     const std::vector<transforms::TransformSpec>& specs,
                     const image::ImageTensor& img) {
    if (models.empty() || models.size() != specs.size())
        throw ParameterError("ensemble needs equally many models and transforms (>= 1)");
    const int classes = models[0]->arch.num_classes;
    std::vector<double> mean_probs(classes, 0.0);
    for (size_t i = 0; i < models.size(); ++i) {
        if (models[i]->arch.num_classes != classes)
            throw ParameterError("ensemble members disagree on the class count");
        const auto transformed = transforms::apply(specs[i], img);
        const auto probs = predict_probs(*models[i], transformed);
        for (int c = 0; c < classes; ++c) mean_probs[c] += probs[c];
    }
    for (double& p : mean_probs) p /= static_cast<double>(models.size());
    return argmax_low_tie(mean_probs);
}

// --- persistence -----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'L', 'N', 'S'};
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());

    const std::string arch_json = arch_to_json(model.arch).dump();
    f.write(kMagic, 4);
    write_u32(f, kCheckpointVersion);
    write_u32(f, static_cast<uint32_t>(arch_json.size()));
    f.write(arch_json.data(), static_cast<std::streamsize>(arch_json.size()));

    std::vector<float> buf;
    for (const auto& t : model.params.tensors) {
        buf.resize(t.size());
        for (size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f) throw IoError("write failed: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());

    char magic[4] = {};
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("not a BLNS checkpoint: " + path.string());
    const uint32_t version = read_u32(f);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const uint32_t json_len = read_u32(f);
    std::string arch_json(json_len, '\0');
    f.read(arch_json.data(), json_len);
    if (!f) throw FormatError("truncated checkpoint header: " + path.string());

    TrainedModel model;
    try {
        model.arch = arch_from_json(nlohmann::json::parse(arch_json));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("corrupt arch JSON in checkpoint: " + std::string(e.what()));
    }

    const auto sizes = tensor_sizes(model.arch);
    model.params.tensors.resize(sizes.size());
    std::vector<float> buf;
    for (size_t t = 0; t < sizes.size(); ++t) {
        buf.resize(sizes[t]);
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(sizes[t] * sizeof(float)));
        if (!f) throw FormatError("truncated parameter data: " + path.string());
        model.params.tensors[t].resize(sizes[t]);
        for (size_t i = 0; i < sizes[t]; ++i)
            model.params.tensors[t][i] = static_cast<double>(buf[i]);
    }
    return model;
}

void save_history_csv(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "epoch,train_loss,train_acc,val_acc\n";
    for (size_t e = 0; e < model.history.size(); ++e) {
        const auto& s = model.history[e];
        f << (e + 1) << ',' << s.train_loss << ',' << s.train_acc << ',' << s.val_acc
          << '\n';
    }
}

}  // namespace biaslens::net
