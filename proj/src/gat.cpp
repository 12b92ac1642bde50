#include "vprune/gat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "vprune/rng.hpp"
#include "vprune/util.hpp"

namespace vprune {

namespace {

constexpr double kScoreClamp = 1e-7;

// Neighbor aggregation runs in a value-canonical order (sort by attention
// logit, then lexicographically by the transformed feature row). Isomorphic
// graphs therefore produce bitwise-identical sums, which makes permutation
// equivariance exact instead of merely approximate.
struct HeadCache {
    Eigen::MatrixXd Z;                       // n x out
    std::vector<std::vector<int>> ord;       // canonical neighbor order per node
    std::vector<std::vector<double>> raw;    // pre-LeakyReLU logits, aligned with ord
    std::vector<std::vector<double>> alpha;  // attention coefficients, aligned with ord
    Eigen::MatrixXd M;                       // n x out aggregated messages
};

struct LayerCache {
    Eigen::MatrixXd input;
    std::vector<HeadCache> heads;
    Eigen::MatrixXd output;  // post-activation
};

bool row_less(const Eigen::MatrixXd& Z, int ra, int rb) {
    for (int c = 0; c < Z.cols(); ++c) {
        if (Z(ra, c) != Z(rb, c)) return Z(ra, c) < Z(rb, c);
    }
    return false;
}

void head_forward(const GatLayer& layer, const GatGraph& graph, const Eigen::MatrixXd& h,
                  int head, HeadCache& cache) {
    const int n = graph.n();
    const int out = layer.out_dim;
    const Eigen::MatrixXd& W = layer.W[static_cast<std::size_t>(head)];
    const Eigen::VectorXd& a = layer.a[static_cast<std::size_t>(head)];
    const Eigen::VectorXd a_src = a.head(out);
    const Eigen::VectorXd a_dst = a.tail(out);

    cache.Z = h * W.transpose();
    const Eigen::VectorXd src = cache.Z * a_src;
    const Eigen::VectorXd dst = cache.Z * a_dst;

    cache.ord.assign(static_cast<std::size_t>(n), {});
    cache.raw.assign(static_cast<std::size_t>(n), {});
    cache.alpha.assign(static_cast<std::size_t>(n), {});
    cache.M.setZero(n, out);

    for (int i = 0; i < n; ++i) {
        const auto& nbrs = graph.neighbors[static_cast<std::size_t>(i)];
        auto& ord = cache.ord[static_cast<std::size_t>(i)];
        auto& raw = cache.raw[static_cast<std::size_t>(i)];
        auto& alpha = cache.alpha[static_cast<std::size_t>(i)];
        ord.assign(nbrs.begin(), nbrs.end());
        std::sort(ord.begin(), ord.end(), [&](int ja, int jb) {
            const double ea = src(i) + dst(ja);
            const double eb = src(i) + dst(jb);
            if (ea != eb) return ea < eb;
            return row_less(cache.Z, ja, jb);
        });
        raw.resize(ord.size());
        alpha.resize(ord.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ord.size(); ++k) {
            const double e = src(i) + dst(ord[k]);
            raw[k] = e;
            const double l = e > 0.0 ? e : layer.leaky_slope * e;
            mx = std::max(mx, l);
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < ord.size(); ++k) {
            const double l = raw[k] > 0.0 ? raw[k] : layer.leaky_slope * raw[k];
            alpha[k] = std::exp(l - mx);
            denom += alpha[k];
        }
        for (std::size_t k = 0; k < ord.size(); ++k) alpha[k] /= denom;
        for (std::size_t k = 0; k < ord.size(); ++k)
            cache.M.row(i) += alpha[k] * cache.Z.row(ord[k]);
    }
}

void layer_forward_cached(const GatLayer& layer, const GatGraph& graph, const Eigen::MatrixXd& h,
                          LayerCache& cache) {
    if (h.cols() != layer.in_dim)
        throw Error("gat: feature dim " + std::to_string(h.cols()) + " != layer in_dim " +
                    std::to_string(layer.in_dim));
    const int n = graph.n();
    cache.input = h;
    cache.heads.assign(static_cast<std::size_t>(layer.heads), {});
    for (int k = 0; k < layer.heads; ++k)
        head_forward(layer, graph, h, k, cache.heads[static_cast<std::size_t>(k)]);

    if (layer.average_heads) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, layer.out_dim);
        for (const auto& hc : cache.heads) mean += hc.M;
        mean /= static_cast<double>(layer.heads);
        // clamp keeps scores strictly inside (0,1) even when the sigmoid
        // saturates in double precision
        cache.output = mean.unaryExpr([](double v) {
            return std::clamp(1.0 / (1.0 + std::exp(-v)), kScoreClamp, 1.0 - kScoreClamp);
        });
    } else {
        cache.output.resize(n, layer.heads * layer.out_dim);
        for (int k = 0; k < layer.heads; ++k)
            cache.output.middleCols(k * layer.out_dim, layer.out_dim) =
                cache.heads[static_cast<std::size_t>(k)].M.cwiseMax(0.0);
    }
}

void forward_all(const GatModel& model, const GatGraph& graph,
                 std::vector<LayerCache>& caches) {
    caches.assign(model.layers.size(), {});
    Eigen::MatrixXd h = graph.features;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        layer_forward_cached(model.layers[l], graph, h, caches[l]);
        h = caches[l].output;
    }
}

Eigen::VectorXd xavier_vector(int len, int fan_in, int fan_out, Rng& rng) {
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::VectorXd v(len);
    for (int i = 0; i < len; ++i) v(i) = rng.uniform(-lim, lim);
    return v;
}

Eigen::MatrixXd xavier_matrix(int rows, int cols, Rng& rng) {
    const double lim = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-lim, lim);
    return m;
}

}  // namespace

void GatHyper::validate() const {
    if (heads < 1) throw ConfigError("gat.heads: must be >= 1");
    if (hidden_dim < 1) throw ConfigError("gat.hidden_dim: must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("gat.learning_rate: must be positive");
    if (weight_decay < 0.0) throw ConfigError("gat.weight_decay: must be >= 0");
    if (epochs < 0) throw ConfigError("gat.epochs: must be >= 0");
    if (!(threshold >= 0.0) || !(threshold <= 1.0))
        throw ConfigError("gat.threshold: must be in [0,1]");
}

GatModel GatModel::create(int in_dim, const GatHyper& hyper, std::uint64_t seed, bool zero_init) {
    hyper.validate();
    if (in_dim < 1) throw Error("gat: input dim must be >= 1");
    GatModel model;
    model.hyper = hyper;
    model.init_seed = seed;
    Rng rng(split_seed(seed, 0x6a71));

    constexpr int kHiddenLayers = 4;
    int in = in_dim;
    for (int l = 0; l < kHiddenLayers + 1; ++l) {
        GatLayer layer;
        layer.heads = hyper.heads;
        layer.in_dim = in;
        const bool is_output = l == kHiddenLayers;
        layer.out_dim = is_output ? 1 : hyper.hidden_dim;
        layer.average_heads = is_output;
        for (int k = 0; k < layer.heads; ++k) {
            if (zero_init) {
                layer.W.push_back(Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim));
                layer.a.push_back(Eigen::VectorXd::Zero(2 * layer.out_dim));
            } else {
                layer.W.push_back(xavier_matrix(layer.out_dim, layer.in_dim, rng));
                layer.a.push_back(xavier_vector(2 * layer.out_dim, 2 * layer.out_dim, 1, rng));
            }
        }
        in = layer.output_width();
        model.layers.push_back(std::move(layer));
    }
    model.feat_mean = Eigen::VectorXd::Zero(in_dim);
    model.feat_std = Eigen::VectorXd::Ones(in_dim);
    return model;
}

GatGraph GatGraph::from_dual(const DualGraph& g) {
    GatGraph out;
    out.neighbors.assign(static_cast<std::size_t>(g.n), {});
    for (int i = 0; i < g.n; ++i) out.neighbors[static_cast<std::size_t>(i)].push_back(i);
    for (const auto& [a, b] : g.edges) {
        if (a < 0 || b < 0 || a >= g.n || b >= g.n)
            throw Error("gat: dual edge references missing node");
        out.neighbors[static_cast<std::size_t>(a)].push_back(b);
        out.neighbors[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& nbrs : out.neighbors) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    if (static_cast<int>(g.features.size()) != g.n)
        throw Error("gat: dual graph features missing or misaligned");
    const int d = g.n > 0 ? static_cast<int>(g.features.at(0).size()) : 0;
    out.features.resize(g.n, d);
    for (int i = 0; i < g.n; ++i) {
        const auto& f = g.features.at(static_cast<std::size_t>(i));
        if (static_cast<int>(f.size()) != d) throw Error("gat: ragged feature vectors");
        for (int c = 0; c < d; ++c) out.features(i, c) = f[static_cast<std::size_t>(c)];
    }
    return out;
}

void GatGraph::standardize(const GatModel& model) {
    if (features.cols() != model.feat_mean.size())
        throw Error("gat: feature dim does not match model input dim");
    for (int c = 0; c < features.cols(); ++c)
        features.col(c) = (features.col(c).array() - model.feat_mean(c)) / model.feat_std(c);
}

std::vector<std::vector<double>> attention_coefficients(const GatLayer& layer,
                                                        const GatGraph& graph, int head) {
    if (head < 0 || head >= layer.heads) throw Error("gat: head out of range");
    HeadCache cache;
    head_forward(layer, graph, graph.features, head, cache);
    // realign with graph.neighbors order for the caller
    std::vector<std::vector<double>> out(static_cast<std::size_t>(graph.n()));
    for (int i = 0; i < graph.n(); ++i) {
        const auto& nbrs = graph.neighbors[static_cast<std::size_t>(i)];
        const auto& ord = cache.ord[static_cast<std::size_t>(i)];
        const auto& alpha = cache.alpha[static_cast<std::size_t>(i)];
        auto& row = out[static_cast<std::size_t>(i)];
        row.assign(nbrs.size(), 0.0);
        for (std::size_t k = 0; k < ord.size(); ++k) {
            const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), ord[k]);
            row[static_cast<std::size_t>(it - nbrs.begin())] = alpha[k];
        }
    }
    return out;
}

Eigen::MatrixXd layer_forward(const GatLayer& layer, const GatGraph& graph,
                              const Eigen::MatrixXd& h) {
    LayerCache cache;
    layer_forward_cached(layer, graph, h, cache);
    return cache.output;
}

Eigen::VectorXd forward_scores(const GatModel& model, const GatGraph& graph) {
    std::vector<LayerCache> caches;
    forward_all(model, graph, caches);
    return caches.back().output.col(0);
}

std::vector<double> predict(const GatModel& model, const DualGraph& graph) {
    if (graph.n == 0) return {};
    GatGraph g = GatGraph::from_dual(graph);
    g.standardize(model);
    const Eigen::VectorXd s = forward_scores(model, g);
    return {s.data(), s.data() + s.size()};
}

BceResult bce_loss(const Eigen::VectorXd& scores, const Eigen::VectorXd& targets) {
    if (scores.size() != targets.size()) throw Error("bce_loss: size mismatch");
    const auto n = scores.size();
    BceResult res;
    res.dscores = Eigen::VectorXd::Zero(n);
    if (n == 0) return res;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = std::clamp(scores(i), kScoreClamp, 1.0 - kScoreClamp);
        const double g = targets(i);
        acc += -(g * std::log(s) + (1.0 - g) * std::log(1.0 - s));
        res.dscores(i) = (s - g) / (s * (1.0 - s)) / static_cast<double>(n);
    }
    res.loss = acc / static_cast<double>(n);
    return res;
}

GatGrads GatGrads::zeros_like(const GatModel& model) {
    GatGrads g;
    for (const auto& layer : model.layers) {
        std::vector<Eigen::MatrixXd> dw;
        std::vector<Eigen::VectorXd> da;
        for (int k = 0; k < layer.heads; ++k) {
            dw.push_back(Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim));
            da.push_back(Eigen::VectorXd::Zero(2 * layer.out_dim));
        }
        g.dW.push_back(std::move(dw));
        g.da.push_back(std::move(da));
    }
    return g;
}

namespace {

// reverse pass through one layer given dM per head; returns gradient wrt input
Eigen::MatrixXd head_backward_accumulate(const GatLayer& layer, const HeadCache& hc,
                                         const Eigen::MatrixXd& input,
                                         const Eigen::MatrixXd& dM, int head,
                                         Eigen::MatrixXd& dW_out, Eigen::VectorXd& da_out) {
    const int n = static_cast<int>(hc.ord.size());
    const int out = layer.out_dim;
    const Eigen::VectorXd& a = layer.a[static_cast<std::size_t>(head)];
    const Eigen::VectorXd a_src = a.head(out);
    const Eigen::VectorXd a_dst = a.tail(out);

    Eigen::MatrixXd dZ = Eigen::MatrixXd::Zero(n, out);
    Eigen::VectorXd da_src = Eigen::VectorXd::Zero(out);
    Eigen::VectorXd da_dst = Eigen::VectorXd::Zero(out);

    std::vector<double> dal;
    for (int i = 0; i < n; ++i) {
        const auto& ord = hc.ord[static_cast<std::size_t>(i)];
        const auto& raw = hc.raw[static_cast<std::size_t>(i)];
        const auto& alpha = hc.alpha[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd gm = dM.row(i);

        dal.assign(ord.size(), 0.0);
        double sdot = 0.0;
        for (std::size_t k = 0; k < ord.size(); ++k) {
            dal[k] = gm.dot(hc.Z.row(ord[k]));
            sdot += alpha[k] * dal[k];
            dZ.row(ord[k]) += alpha[k] * gm;
        }
        double draw_sum = 0.0;
        for (std::size_t k = 0; k < ord.size(); ++k) {
            const double de = alpha[k] * (dal[k] - sdot);
            const double draw = raw[k] > 0.0 ? de : layer.leaky_slope * de;
            draw_sum += draw;
            da_dst += draw * hc.Z.row(ord[k]).transpose();
            dZ.row(ord[k]) += draw * a_dst.transpose();
        }
        da_src += draw_sum * hc.Z.row(i).transpose();
        dZ.row(i) += draw_sum * a_src.transpose();
    }

    dW_out.noalias() += dZ.transpose() * input;
    da_out.head(out) += da_src;
    da_out.tail(out) += da_dst;
    return dZ * layer.W[static_cast<std::size_t>(head)];  // gradient wrt layer input
}

}  // namespace

double backward(const GatModel& model, const GatGraph& graph, const Eigen::VectorXd& targets,
                GatGrads& grads, Eigen::VectorXd* scores_out) {
    std::vector<LayerCache> caches;
    forward_all(model, graph, caches);
    const Eigen::VectorXd scores = caches.back().output.col(0);
    if (scores_out) *scores_out = scores;

    const BceResult bce = bce_loss(scores, targets);

    const int n = graph.n();
    Eigen::MatrixXd dout;  // gradient wrt the current layer's output
    {
        // output layer activation: sigmoid of the head average
        const Eigen::VectorXd dz =
            bce.dscores.array() * scores.array() * (1.0 - scores.array());
        dout = dz;
    }

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const GatLayer& layer = model.layers[l];
        const LayerCache& cache = caches[l];
        Eigen::MatrixXd dinput = Eigen::MatrixXd::Zero(n, layer.in_dim);
        for (int k = 0; k < layer.heads; ++k) {
            const HeadCache& hc = cache.heads[static_cast<std::size_t>(k)];
            Eigen::MatrixXd dM;
            if (layer.average_heads) {
                dM = dout / static_cast<double>(layer.heads);
            } else {
                dM = dout.middleCols(k * layer.out_dim, layer.out_dim);
                // ReLU mask from the cached pre-activation messages
                dM = dM.cwiseProduct((hc.M.array() > 0.0).cast<double>().matrix());
            }
            dinput += head_backward_accumulate(layer, hc, cache.input, dM, k,
                                               grads.dW[l][static_cast<std::size_t>(k)],
                                               grads.da[l][static_cast<std::size_t>(k)]);
        }
        dout = std::move(dinput);
    }
    return bce.loss;
}

AdamState AdamState::zeros_like(const GatModel& model) {
    AdamState st;
    for (const auto& layer : model.layers) {
        std::vector<Moments> ms;
        for (int k = 0; k < layer.heads; ++k) {
            Moments m;
            m.mW = Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim);
            m.vW = Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim);
            m.ma = Eigen::VectorXd::Zero(2 * layer.out_dim);
            m.va = Eigen::VectorXd::Zero(2 * layer.out_dim);
            ms.push_back(std::move(m));
        }
        st.layers.push_back(std::move(ms));
    }
    return st;
}

void adam_step(GatModel& model, const GatGrads& grads, AdamState& state, double lr, double wd) {
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        GatLayer& layer = model.layers[l];
        for (int k = 0; k < layer.heads; ++k) {
            auto& mom = state.layers.at(l).at(static_cast<std::size_t>(k));
            auto& W = layer.W[static_cast<std::size_t>(k)];
            auto& a = layer.a[static_cast<std::size_t>(k)];
            const auto& gW = grads.dW.at(l).at(static_cast<std::size_t>(k));
            const auto& ga = grads.da.at(l).at(static_cast<std::size_t>(k));
            if (W.rows() != gW.rows() || W.cols() != gW.cols() || a.size() != ga.size())
                throw Error("adam_step: gradient shape mismatch");

            // decoupled weight decay first
            if (wd != 0.0) {
                W -= lr * wd * W;
                a -= lr * wd * a;
            }
            mom.mW = b1 * mom.mW + (1.0 - b1) * gW;
            mom.vW = b2 * mom.vW + (1.0 - b2) * gW.cwiseProduct(gW);
            mom.ma = b1 * mom.ma + (1.0 - b1) * ga;
            mom.va = b2 * mom.va + (1.0 - b2) * ga.cwiseProduct(ga);

            W -= (lr * (mom.mW / bc1).array() / ((mom.vW / bc2).array().sqrt() + state.eps))
                     .matrix();
            a -= (lr * (mom.ma / bc1).array() / ((mom.va / bc2).array().sqrt() + state.eps))
                     .matrix();
        }
    }
}

TrainResult train(GatModel& model, const std::vector<TrainSample>& dataset, int epochs,
                  std::uint64_t shuffle_seed) {
    if (dataset.empty()) throw Error("train: empty dataset");
    const int d = model.input_dim();
    for (const auto& s : dataset) {
        if (s.graph.features.cols() != d) throw Error("train: feature dim mismatch");
        if (s.targets.size() != s.graph.n()) throw Error("train: targets misaligned");
    }

    // fit per-channel standardization over all nodes of the dataset
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    long long total = 0;
    for (const auto& s : dataset) {
        for (int i = 0; i < s.graph.n(); ++i) {
            mean += s.graph.features.row(i).transpose();
            sq += s.graph.features.row(i).transpose().cwiseProduct(
                s.graph.features.row(i).transpose());
            ++total;
        }
    }
    if (total == 0) throw Error("train: dataset has no nodes");
    mean /= static_cast<double>(total);
    sq /= static_cast<double>(total);
    model.feat_mean = mean;
    model.feat_std = (sq - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);

    std::vector<TrainSample> prepared = dataset;
    for (auto& s : prepared) s.graph.standardize(model);

    AdamState state = AdamState::zeros_like(model);
    Rng rng(split_seed(shuffle_seed, 0x7e6e));
    std::vector<std::size_t> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const auto& sample = prepared[idx];
            GatGrads grads = GatGrads::zeros_like(model);
            const double loss = backward(model, sample.graph, sample.targets, grads);
            if (!std::isfinite(loss))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
            adam_step(model, grads, state, model.hyper.learning_rate, model.hyper.weight_decay);
            epoch_loss += loss;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(prepared.size()));
    }
    return result;
}

namespace {

constexpr char kCkptMagic[4] = {'G', 'A', 'T', 'M'};
constexpr std::uint32_t kCkptVersion = 1;

}  // namespace

void checkpoint_save(const std::filesystem::path& path, const GatModel& model) {
    nlohmann::json j;
    j["version"] = kCkptVersion;
    j["in_dim"] = model.input_dim();
    j["init_seed"] = model.init_seed;
    j["hyper"] = {{"heads", model.hyper.heads},
                  {"hidden_dim", model.hyper.hidden_dim},
                  {"learning_rate", model.hyper.learning_rate},
                  {"weight_decay", model.hyper.weight_decay},
                  {"epochs", model.hyper.epochs},
                  {"threshold", model.hyper.threshold}};
    j["feat_mean"] = std::vector<double>(model.feat_mean.data(),
                                         model.feat_mean.data() + model.feat_mean.size());
    j["feat_std"] = std::vector<double>(model.feat_std.data(),
                                        model.feat_std.data() + model.feat_std.size());
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers)
        j["layers"].push_back({{"heads", layer.heads},
                               {"in_dim", layer.in_dim},
                               {"out_dim", layer.out_dim},
                               {"average_heads", layer.average_heads},
                               {"leaky_slope", layer.leaky_slope}});
    const std::string header = j.dump();

    std::string blob;
    auto put_f32 = [&blob](double v) {
        const float f = static_cast<float>(v);
        char b[4];
        std::memcpy(b, &f, 4);
        blob.append(b, 4);
    };
    for (const auto& layer : model.layers) {
        for (int k = 0; k < layer.heads; ++k) {
            const auto& W = layer.W[static_cast<std::size_t>(k)];
            for (int r = 0; r < W.rows(); ++r)
                for (int c = 0; c < W.cols(); ++c) put_f32(W(r, c));
            const auto& a = layer.a[static_cast<std::size_t>(k)];
            for (int i = 0; i < a.size(); ++i) put_f32(a(i));
        }
    }

    std::string out;
    out.append(kCkptMagic, 4);
    auto put_u32 = [&out](std::uint32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        out.append(b, 4);
    };
    put_u32(kCkptVersion);
    put_u32(static_cast<std::uint32_t>(header.size()));
    out += header;
    out += blob;
    write_file(path, out);
}

GatModel checkpoint_load(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kCkptMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in " + path.string());
    std::uint32_t version = 0, header_len = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&header_len, bytes.data() + 8, 4);
    if (version != kCkptVersion) throw IoError("checkpoint: unsupported version");
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw IoError("checkpoint: truncated header");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.substr(12, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: bad header json: ") + e.what());
    }

    GatModel model;
    try {
        model.init_seed = j.at("init_seed").get<std::uint64_t>();
        const auto& h = j.at("hyper");
        model.hyper.heads = h.at("heads").get<int>();
        model.hyper.hidden_dim = h.at("hidden_dim").get<int>();
        model.hyper.learning_rate = h.at("learning_rate").get<double>();
        model.hyper.weight_decay = h.at("weight_decay").get<double>();
        model.hyper.epochs = h.at("epochs").get<int>();
        model.hyper.threshold = h.at("threshold").get<double>();
        const auto fm = j.at("feat_mean").get<std::vector<double>>();
        const auto fs = j.at("feat_std").get<std::vector<double>>();
        model.feat_mean = Eigen::Map<const Eigen::VectorXd>(fm.data(),
                                                            static_cast<Eigen::Index>(fm.size()));
        model.feat_std = Eigen::Map<const Eigen::VectorXd>(fs.data(),
                                                           static_cast<Eigen::Index>(fs.size()));
        for (const auto& lj : j.at("layers")) {
            GatLayer layer;
            layer.heads = lj.at("heads").get<int>();
            layer.in_dim = lj.at("in_dim").get<int>();
            layer.out_dim = lj.at("out_dim").get<int>();
            layer.average_heads = lj.at("average_heads").get<bool>();
            layer.leaky_slope = lj.at("leaky_slope").get<double>();
            model.layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: bad header fields: ") + e.what());
    }

    // header sanity: chained layer widths and matching normalizer size
    int expect_in = static_cast<int>(model.feat_mean.size());
    if (model.feat_std.size() != expect_in || model.layers.empty())
        throw IoError("checkpoint: inconsistent header in " + path.string());
    for (const auto& layer : model.layers) {
        if (layer.heads < 1 || layer.in_dim != expect_in || layer.out_dim < 1)
            throw IoError("checkpoint: incompatible layer dims in " + path.string());
        expect_in = layer.output_width();
    }
    if (model.layers.back().out_dim != 1 || !model.layers.back().average_heads)
        throw IoError("checkpoint: output layer must average heads to width 1");

    std::size_t off = 12 + header_len;
    auto get_f32 = [&bytes, &off, &path]() {
        if (off + 4 > bytes.size()) throw IoError("checkpoint: truncated blob in " + path.string());
        float f;
        std::memcpy(&f, bytes.data() + off, 4);
        off += 4;
        return static_cast<double>(f);
    };
    for (auto& layer : model.layers) {
        for (int k = 0; k < layer.heads; ++k) {
            Eigen::MatrixXd W(layer.out_dim, layer.in_dim);
            for (int r = 0; r < W.rows(); ++r)
                for (int c = 0; c < W.cols(); ++c) W(r, c) = get_f32();
            Eigen::VectorXd a(2 * layer.out_dim);
            for (int i = 0; i < a.size(); ++i) a(i) = get_f32();
            layer.W.push_back(std::move(W));
            layer.a.push_back(std::move(a));
        }
    }
    if (off != bytes.size()) throw IoError("checkpoint: trailing bytes in " + path.string());
    return model;
}

}  // namespace vprune
