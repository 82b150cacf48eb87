#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "ecomedit/error.hpp"
#include "ecomedit/model.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

constexpr double kRmsEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
    const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

// Row-wise RMS normalisation without the gain: n = x / rms(x).
void rms_normalize(const Matrix& x, Matrix& n, Vector& r) {
    const double d = static_cast<double>(x.cols());
    r.resize(x.rows());
    n.resize(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        r(t) = std::sqrt(x.row(t).squaredNorm() / d + kRmsEps);
        n.row(t) = x.row(t) / r(t);
    }
}

// Given dy for y = n .* g, returns dx.
Matrix rms_backward(const Matrix& n, const Vector& r, const Vector& g, const Matrix& dy) {
    const double d = static_cast<double>(n.cols());
    Matrix dx(n.rows(), n.cols());
    for (Eigen::Index t = 0; t < n.rows(); ++t) {
        Eigen::RowVectorXd dyn = dy.row(t).cwiseProduct(g.transpose());
        const double proj = dyn.dot(n.row(t)) / d;
        dx.row(t) = (dyn - proj * n.row(t)) / r(t);
    }
    return dx;
}

// Gain gradient of y = n .* g.
Vector gain_grad(const Matrix& n, const Matrix& dy) { return n.cwiseProduct(dy).colwise().sum().transpose(); }

Matrix apply_gain(const Matrix& n, const Vector& g) { return n * g.asDiagonal(); }

// Deterministic standard normals from a 64-bit state (splitmix64 + Box-Muller).
class Normal {
public:
    explicit Normal(std::uint64_t seed) : state_(seed) {}
    double operator()() {
        if (spare_) {
            spare_ = false;
            return saved_;
        }
        double u1 = uniform(), u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        saved_ = rad * std::sin(2.0 * M_PI * u2);
        spare_ = true;
        return rad * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * (1.0 / 9007199254740992.0); }

    std::uint64_t state_;
    bool spare_ = false;
    double saved_ = 0.0;
};

Matrix random_matrix(Normal& rng, Eigen::Index rows, Eigen::Index cols, double std) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std * rng();
    return m;
}

}  // namespace

struct ToyTransformer::Cache {
    struct LayerCache {
        Matrix x_in, n1, q, k, v, attn, xa, n2, pre, keys;
        Vector r1, r2;
        std::vector<Matrix> probs;  // per head, T x T (lower triangular)
    };
    std::vector<LayerCache> layers;
    Matrix x_final, nf;
    Vector rf;
};

ToyTransformer::ToyTransformer(Tokenizer tok, const ToyConfig& cfg) : tok_(std::move(tok)), cfg_(cfg) {
    if (cfg.hidden_dim % cfg.num_heads != 0) throw ConfigError("hidden_dim must be divisible by num_heads");
    if (cfg.num_layers < 1 || cfg.hidden_dim < 1 || cfg.mlp_dim < 1 || cfg.max_positions < 1)
        throw ConfigError("toy model dimensions must be positive");
    Normal rng(cfg.seed);
    const int d = cfg.hidden_dim, m = cfg.mlp_dim, V = tok_.vocab_size();
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    const double sm = 1.0 / std::sqrt(static_cast<double>(m));
    p_.tok_emb = random_matrix(rng, V, d, cfg.embed_scale);
    p_.pos_emb = random_matrix(rng, cfg.max_positions, d, cfg.position_scale);
    p_.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (std::size_t li = 0; li < p_.layers.size(); ++li) {
        auto& L = p_.layers[li];
        const bool readout = li + 1 == p_.layers.size() && p_.layers.size() > 1;
        L.ln1 = Vector::Ones(d);
        L.ln2 = Vector::Ones(d);
        L.wq = random_matrix(rng, d, d, cfg.qk_scale * sd);
        L.wk = random_matrix(rng, d, d, cfg.qk_scale * sd);
        L.wv = random_matrix(rng, d, d, sd);
        L.wo = random_matrix(rng, d, d, (readout ? cfg.readout_ov_scale : cfg.ov_scale) * sd);
        L.w_in = random_matrix(rng, m, d, sd);
        L.w_out = random_matrix(rng, d, m, cfg.mlp_out_scale * sm);
    }
    p_.lnf = Vector::Ones(d);
    p_.unembed = random_matrix(rng, V, d, cfg.unembed_scale * sd);
}

const Matrix& ToyTransformer::down_proj(int layer) const {
    if (layer < 0 || layer >= num_layers()) throw Error("layer index out of range: " + std::to_string(layer));
    return p_.layers[static_cast<std::size_t>(layer)].w_out;
}

void ToyTransformer::set_down_proj(int layer, const Matrix& w) {
    if (layer < 0 || layer >= num_layers()) throw Error("layer index out of range: " + std::to_string(layer));
    auto& dst = p_.layers[static_cast<std::size_t>(layer)].w_out;
    if (w.rows() != dst.rows() || w.cols() != dst.cols()) throw Error("down projection shape mismatch");
    dst = w;
}

void ToyTransformer::check_tokens(std::span<const TokenId> tokens) const {
    if (tokens.empty()) throw Error("empty token sequence");
    if (static_cast<int>(tokens.size()) > cfg_.max_positions)
        throw Error("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_positions " +
                    std::to_string(cfg_.max_positions));
    for (auto t : tokens)
        if (t < 0 || t >= vocab_size()) throw Error("token id out of range: " + std::to_string(t));
}

Matrix ToyTransformer::run(std::span<const TokenId> tokens, const Injection* inj, Cache* cache, int capture_layer,
                           LayerTrace* capture) const {
    check_tokens(tokens);
    const auto T = static_cast<Eigen::Index>(tokens.size());
    const int d = cfg_.hidden_dim, H = cfg_.num_heads, dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (inj && (inj->layer < 0 || inj->layer >= num_layers() || static_cast<Eigen::Index>(inj->position) >= T ||
                inj->value.size() != d))
        throw Error("invalid injection");

    Matrix x(T, d);
    for (Eigen::Index t = 0; t < T; ++t) x.row(t) = p_.tok_emb.row(tokens[static_cast<std::size_t>(t)]) + p_.pos_emb.row(t);

    if (cache) cache->layers.resize(p_.layers.size());
    for (std::size_t li = 0; li < p_.layers.size(); ++li) {
        const auto& L = p_.layers[li];
        Cache::LayerCache local;
        auto& c = cache ? cache->layers[li] : local;
        c.x_in = x;
        rms_normalize(x, c.n1, c.r1);
        Matrix h1 = apply_gain(c.n1, L.ln1);
        c.q = h1 * L.wq.transpose();
        c.k = h1 * L.wk.transpose();
        c.v = h1 * L.wv.transpose();
        Matrix attn(T, d);
        c.probs.assign(static_cast<std::size_t>(H), Matrix());
        for (int h = 0; h < H; ++h) {
            Matrix s = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
            Matrix p = Matrix::Zero(T, T);
            for (Eigen::Index t = 0; t < T; ++t) {
                const double mx = s.row(t).head(t + 1).maxCoeff();
                double z = 0.0;
                for (Eigen::Index j = 0; j <= t; ++j) z += (p(t, j) = std::exp(s(t, j) - mx));
                p.row(t).head(t + 1) /= z;
            }
            attn.middleCols(h * dh, dh) = p * c.v.middleCols(h * dh, dh);
            c.probs[static_cast<std::size_t>(h)] = std::move(p);
        }
        c.xa = x + attn * L.wo.transpose();
        if (cache) c.attn = attn;
        rms_normalize(c.xa, c.n2, c.r2);
        c.pre = apply_gain(c.n2, L.ln2) * L.w_in.transpose();
        c.keys = c.pre.unaryExpr([](double v) { return gelu(v); });
        Matrix mlp = c.keys * L.w_out.transpose();
        if (inj && inj->layer == static_cast<int>(li)) mlp.row(static_cast<Eigen::Index>(inj->position)) = inj->value.transpose();
        x = c.xa + mlp;
        if (capture && capture_layer == static_cast<int>(li)) {
            capture->keys = c.keys;
            capture->mlp_out = mlp;
            capture->residual = x;
        }
    }
    Matrix nf;
    Vector rf;
    rms_normalize(x, nf, rf);
    Matrix out = apply_gain(nf, p_.lnf) * p_.unembed.transpose();
    if (cache) {
        cache->x_final = std::move(x);
        cache->nf = std::move(nf);
        cache->rf = std::move(rf);
    }
    return out;
}

Matrix ToyTransformer::logits(std::span<const TokenId> tokens) const { return run(tokens, nullptr, nullptr, -1, nullptr); }

LayerTrace ToyTransformer::trace(std::span<const TokenId> tokens, int layer, const Injection* inj) const {
    if (layer < 0 || layer >= num_layers()) throw Error("layer index out of range: " + std::to_string(layer));
    LayerTrace tr;
    tr.logits = run(tokens, inj, nullptr, layer, &tr);
    return tr;
}

LossGradient ToyTransformer::loss_gradient(std::span<const TokenId> tokens, std::size_t target_start, int layer,
                                           const Injection* inj) const {
    if (layer < 0 || layer >= num_layers()) throw Error("layer index out of range: " + std::to_string(layer));
    if (target_start == 0 || target_start >= tokens.size())
        throw Error("target must be a nonempty suffix that follows at least one prompt token");
    Cache cache;
    LayerTrace capture;
    Matrix lg = run(tokens, inj, &cache, layer, &capture);
    const auto T = static_cast<Eigen::Index>(tokens.size());
    const int d = cfg_.hidden_dim, H = cfg_.num_heads, dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double n_targets = static_cast<double>(tokens.size() - target_start);

    LossGradient out;
    Matrix dlogits = Matrix::Zero(T, lg.cols());
    for (std::size_t i = target_start; i < tokens.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i - 1);
        const double mx = lg.row(row).maxCoeff();
        Eigen::RowVectorXd e = (lg.row(row).array() - mx).exp().matrix();
        const double z = e.sum();
        out.loss += -(lg(row, tokens[i]) - mx - std::log(z)) / n_targets;
        dlogits.row(row) = e / (z * n_targets);
        dlogits(row, tokens[i]) -= 1.0 / n_targets;
    }

    Matrix dx = backward(tokens, cache, dlogits, layer, inj, nullptr);
    out.d_mlp_out = std::move(dx);
    out.keys = std::move(capture.keys);
    return out;
}

Matrix ToyTransformer::backward(std::span<const TokenId> tokens, const Cache& cache, const Matrix& dlogits,
                                int stop_layer, const Injection* inj, ToyParameters* grad) const {
    const auto T = static_cast<Eigen::Index>(tokens.size());
    const int d = cfg_.hidden_dim, H = cfg_.num_heads, dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dyf = dlogits * p_.unembed;
    if (grad) {
        grad->unembed += dlogits.transpose() * apply_gain(cache.nf, p_.lnf);
        grad->lnf += gain_grad(cache.nf, dyf);
    }
    Matrix dx = rms_backward(cache.nf, cache.rf, p_.lnf, dyf);
    for (int li = num_layers() - 1; li > stop_layer; --li) {
        const auto& L = p_.layers[static_cast<std::size_t>(li)];
        const auto& c = cache.layers[static_cast<std::size_t>(li)];
        // MLP branch; an injected row does not depend on the layer's weights.
        Matrix dmlp = dx;
        if (inj && inj->layer == li) dmlp.row(static_cast<Eigen::Index>(inj->position)).setZero();
        Matrix dpre = (dmlp * L.w_out).cwiseProduct(c.pre.unaryExpr([](double v) { return gelu_grad(v); }));
        Matrix h2 = apply_gain(c.n2, L.ln2);
        Matrix dh2 = dpre * L.w_in;
        if (grad) {
            auto& G = grad->layers[static_cast<std::size_t>(li)];
            G.w_out += dmlp.transpose() * c.keys;
            G.w_in += dpre.transpose() * h2;
            G.ln2 += gain_grad(c.n2, dh2);
        }
        Matrix dxa = dx + rms_backward(c.n2, c.r2, L.ln2, dh2);
        // Attention branch.
        Matrix dattn = dxa * L.wo;
        Matrix dq(T, d), dk(T, d), dv(T, d);
        for (int h = 0; h < H; ++h) {
            const auto& p = c.probs[static_cast<std::size_t>(h)];
            auto doh = dattn.middleCols(h * dh, dh);
            Matrix dp = doh * c.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = p.transpose() * doh;
            Matrix ds(T, T);
            for (Eigen::Index t = 0; t < T; ++t) {
                const double dot = p.row(t).dot(dp.row(t));
                ds.row(t) = p.row(t).cwiseProduct((dp.row(t).array() - dot).matrix());
            }
            ds *= scale;
            dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
        }
        Matrix dh1 = dq * L.wq + dk * L.wk + dv * L.wv;
        if (grad) {
            auto& G = grad->layers[static_cast<std::size_t>(li)];
            Matrix h1 = apply_gain(c.n1, L.ln1);
            G.wo += dxa.transpose() * c.attn;
            G.wq += dq.transpose() * h1;
            G.wk += dk.transpose() * h1;
            G.wv += dv.transpose() * h1;
            G.ln1 += gain_grad(c.n1, dh1);
        }
        dx = dxa + rms_backward(c.n1, c.r1, L.ln1, dh1);
    }
    if (grad && stop_layer < 0) {
        for (Eigen::Index t = 0; t < T; ++t) {
            grad->tok_emb.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
            grad->pos_emb.row(t) += dx.row(t);
        }
    }
    return dx;
}

double ToyTransformer::lm_loss(std::span<const TokenId> tokens, ToyParameters* grad) const {
    if (tokens.size() < 2) throw Error("language-model loss needs at least two tokens");
    Cache cache;
    Matrix lg = run(tokens, nullptr, grad ? &cache : nullptr, -1, nullptr);
    const auto T = static_cast<Eigen::Index>(tokens.size());
    const double n = static_cast<double>(T - 1);
    double loss = 0.0;
    Matrix dlogits = Matrix::Zero(T, lg.cols());
    for (Eigen::Index row = 0; row + 1 < T; ++row) {
        const TokenId next = tokens[static_cast<std::size_t>(row + 1)];
        const double mx = lg.row(row).maxCoeff();
        Eigen::RowVectorXd e = (lg.row(row).array() - mx).exp().matrix();
        const double z = e.sum();
        loss += -(lg(row, next) - mx - std::log(z)) / n;
        dlogits.row(row) = e / (z * n);
        dlogits(row, next) -= 1.0 / n;
    }
    if (grad) backward(tokens, cache, dlogits, -1, nullptr, grad);
    return loss;
}

std::vector<double> ToyTransformer::fit(std::span<const std::string> texts, const FitConfig& cfg) {
    std::vector<Tokens> data;
    for (const auto& t : texts) {
        Tokens toks = tok_.encode(t);
        if (static_cast<int>(toks.size()) > cfg_.max_positions) toks.resize(static_cast<std::size_t>(cfg_.max_positions));
        if (toks.size() >= 2) data.push_back(std::move(toks));
    }
    if (data.empty()) throw Error("no training sequence has two or more tokens");
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ToyParameters m1 = p_.zeros_like(), m2 = p_.zeros_like();
    auto pv = p_.views();
    auto v1 = m1.views(), v2 = m2.views();
    // Batches are drawn with splitmix64 so training is reproducible everywhere.
    std::uint64_t state = cfg.seed;
    auto next = [&state] {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::vector<double> history;
    for (int step = 1; step <= cfg.steps; ++step) {
        ToyParameters g = p_.zeros_like();
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) loss += lm_loss(data[next() % data.size()], &g);
        loss /= cfg.batch;
        if (!std::isfinite(loss)) throw Error("training diverged at step " + std::to_string(step));
        history.push_back(loss);
        auto gv = g.views();
        const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
        for (std::size_t t = 0; t < pv.size(); ++t) {
            for (Eigen::Index i = 0; i < pv[t].size; ++i) {
                const double gi = gv[t].data[i] / cfg.batch;
                double& a = v1[t].data[i];
                double& s2 = v2[t].data[i];
                a = b1 * a + (1 - b1) * gi;
                s2 = b2 * s2 + (1 - b2) * gi * gi;
                pv[t].data[i] -= cfg.learning_rate * (a / c1) / (std::sqrt(s2 / c2) + eps);
            }
        }
    }
    return history;
}

ToyParameters ToyParameters::zeros_like() const {
    ToyParameters z;
    z.tok_emb = Matrix::Zero(tok_emb.rows(), tok_emb.cols());
    z.pos_emb = Matrix::Zero(pos_emb.rows(), pos_emb.cols());
    for (const auto& L : layers) {
        ToyLayer Z;
        Z.ln1 = Vector::Zero(L.ln1.size());
        Z.ln2 = Vector::Zero(L.ln2.size());
        Z.wq = Matrix::Zero(L.wq.rows(), L.wq.cols());
        Z.wk = Matrix::Zero(L.wk.rows(), L.wk.cols());
        Z.wv = Matrix::Zero(L.wv.rows(), L.wv.cols());
        Z.wo = Matrix::Zero(L.wo.rows(), L.wo.cols());
        Z.w_in = Matrix::Zero(L.w_in.rows(), L.w_in.cols());
        Z.w_out = Matrix::Zero(L.w_out.rows(), L.w_out.cols());
        z.layers.push_back(std::move(Z));
    }
    z.lnf = Vector::Zero(lnf.size());
    z.unembed = Matrix::Zero(unembed.rows(), unembed.cols());
    return z;
}

std::vector<TensorView> ToyParameters::views() {
    std::vector<TensorView> out;
    auto add = [&out](std::string name, auto& t) { out.push_back({std::move(name), t.data(), t.size()}); };
    add("tok_emb", tok_emb);
    add("pos_emb", pos_emb);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& L = layers[i];
        const std::string p = "layers." + std::to_string(i) + ".";
        add(p + "ln1", L.ln1);
        add(p + "wq", L.wq);
        add(p + "wk", L.wk);
        add(p + "wv", L.wv);
        add(p + "wo", L.wo);
        add(p + "ln2", L.ln2);
        add(p + "w_in", L.w_in);
        add(p + "w_out", L.w_out);
    }
    add("lnf", lnf);
    add("unembed", unembed);
    return out;
}

std::uint64_t matrix_checksum(const Matrix& m) {
    std::uint64_t h = text::fnv1a64({});
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            double v = m(i, j);
            char bytes[sizeof v];
            std::memcpy(bytes, &v, sizeof v);
            h = text::fnv1a64(std::string_view(bytes, sizeof v), h);
        }
    return h;
}

std::vector<ParameterChecksum> ToyTransformer::parameter_checksums() const {
    std::vector<ParameterChecksum> out;
    out.push_back({"tok_emb", matrix_checksum(p_.tok_emb)});
    out.push_back({"pos_emb", matrix_checksum(p_.pos_emb)});
    for (std::size_t i = 0; i < p_.layers.size(); ++i) {
        const auto& L = p_.layers[i];
        const std::string p = "layers." + std::to_string(i) + ".";
        out.push_back({p + "ln1", matrix_checksum(L.ln1)});
        out.push_back({p + "wq", matrix_checksum(L.wq)});
        out.push_back({p + "wk", matrix_checksum(L.wk)});
        out.push_back({p + "wv", matrix_checksum(L.wv)});
        out.push_back({p + "wo", matrix_checksum(L.wo)});
        out.push_back({p + "ln2", matrix_checksum(L.ln2)});
        out.push_back({p + "w_in", matrix_checksum(L.w_in)});
        out.push_back({p + "w_out", matrix_checksum(L.w_out)});
    }
    out.push_back({"lnf", matrix_checksum(p_.lnf)});
    out.push_back({"unembed", matrix_checksum(p_.unembed)});
    return out;
}

std::uint64_t weights_checksum(const LanguageModel& model) {
    std::uint64_t h = text::fnv1a64({});
    for (const auto& p : model.parameter_checksums()) {
        h = text::fnv1a64(p.name, h);
        h = text::fnv1a64(text::hex64(p.checksum), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// checkpoint I/O: little-endian, see docs/formats.md

namespace {

constexpr char kMagic[8] = {'E', 'C', 'E', 'D', 'T', 'O', 'Y', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((u >> (8 * i)) & 0xff));
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("truncated checkpoint");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

// Row-major block.
void put_block(std::ostream& os, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(os, m(i, j));
}

void get_block(std::istream& is, Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_f64(is);
}

void put_vec(std::ostream& os, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v(i));
}

void get_vec(std::istream& is, Vector& v, Eigen::Index n) {
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = get_f64(is);
}

}  // namespace

void ToyTransformer::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint: " + path.string());
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(tok_.words().size()));
    put_u32(os, static_cast<std::uint32_t>(cfg_.hidden_dim));
    put_u32(os, static_cast<std::uint32_t>(cfg_.num_layers));
    put_u32(os, static_cast<std::uint32_t>(cfg_.num_heads));
    put_u32(os, static_cast<std::uint32_t>(cfg_.mlp_dim));
    put_u32(os, static_cast<std::uint32_t>(cfg_.max_positions));
    for (const auto& w : tok_.words()) {
        put_u32(os, static_cast<std::uint32_t>(w.size()));
        os.write(w.data(), static_cast<std::streamsize>(w.size()));
    }
    put_block(os, p_.tok_emb);
    put_block(os, p_.pos_emb);
    for (const auto& L : p_.layers) {
        put_vec(os, L.ln1);
        put_block(os, L.wq);
        put_block(os, L.wk);
        put_block(os, L.wv);
        put_block(os, L.wo);
        put_vec(os, L.ln2);
        put_block(os, L.w_in);
        put_block(os, L.w_out);
    }
    put_vec(os, p_.lnf);
    put_block(os, p_.unembed);
}

ToyTransformer ToyTransformer::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a toy-model checkpoint: " + path.string());
    if (auto v = get_u32(is); v != kVersion) throw Error("unsupported checkpoint version " + std::to_string(v));
    const auto n_words = get_u32(is);
    ToyTransformer m;
    m.cfg_.hidden_dim = static_cast<int>(get_u32(is));
    m.cfg_.num_layers = static_cast<int>(get_u32(is));
    m.cfg_.num_heads = static_cast<int>(get_u32(is));
    m.cfg_.mlp_dim = static_cast<int>(get_u32(is));
    m.cfg_.max_positions = static_cast<int>(get_u32(is));
    if (m.cfg_.num_heads < 1 || m.cfg_.hidden_dim % m.cfg_.num_heads != 0) throw Error("corrupt checkpoint header");
    std::vector<std::string> words(n_words);
    for (auto& w : words) {
        w.resize(get_u32(is));
        if (!is.read(w.data(), static_cast<std::streamsize>(w.size()))) throw Error("truncated checkpoint");
    }
    m.tok_ = Tokenizer(std::move(words));
    const Eigen::Index V = m.tok_.vocab_size(), d = m.cfg_.hidden_dim, mm = m.cfg_.mlp_dim;
    get_block(is, m.p_.tok_emb, V, d);
    get_block(is, m.p_.pos_emb, m.cfg_.max_positions, d);
    m.p_.layers.resize(static_cast<std::size_t>(m.cfg_.num_layers));
    for (auto& L : m.p_.layers) {
        get_vec(is, L.ln1, d);
        get_block(is, L.wq, d, d);
        get_block(is, L.wk, d, d);
        get_block(is, L.wv, d, d);
        get_block(is, L.wo, d, d);
        get_vec(is, L.ln2, d);
        get_block(is, L.w_in, mm, d);
        get_block(is, L.w_out, d, mm);
    }
    get_vec(is, m.p_.lnf, d);
    get_block(is, m.p_.unembed, V, d);
    return m;
}

}  // namespace ecomedit
