#include "ghost/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ghost {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * kInvSqrt2)); }

double gelu_grad(double u) {
    return 0.5 * (1.0 + std::erf(u * kInvSqrt2)) + u * kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

void add_rowwise(Mat& M, std::span<const double> bias) {
    for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j) M.at(i, j) += bias[static_cast<size_t>(j)];
}

void accumulate_colsum(const Mat& M, std::span<double> out) {
    for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j) out[static_cast<size_t>(j)] += M.at(i, j);
}

void accumulate(Mat& dst, const Mat& src) {
    for (size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += src.a[i];
}

struct LnCache {
    Mat xhat;
    std::vector<double> rstd;
};

Mat layer_norm(const Mat& x, std::span<const double> gamma, std::span<const double> beta,
               LnCache& cache) {
    const int d = x.cols;
    Mat y(x.rows, d);
    cache.xhat = Mat(x.rows, d);
    cache.rstd.assign(static_cast<size_t>(x.rows), 0.0);
    for (int i = 0; i < x.rows; ++i) {
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x.at(i, j);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x.at(i, j) - mu;
            var += c * c;
        }
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd[static_cast<size_t>(i)] = rstd;
        for (int j = 0; j < d; ++j) {
            const double xh = (x.at(i, j) - mu) * rstd;
            cache.xhat.at(i, j) = xh;
            y.at(i, j) = gamma[static_cast<size_t>(j)] * xh + beta[static_cast<size_t>(j)];
        }
    }
    return y;
}

Mat layer_norm_backward(const Mat& dy, const LnCache& cache, std::span<const double> gamma,
                        std::span<double> dgamma, std::span<double> dbeta) {
    const int d = dy.cols;
    Mat dx(dy.rows, d);
    for (int i = 0; i < dy.rows; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double g = dy.at(i, j) * gamma[static_cast<size_t>(j)];
            m1 += g;
            m2 += g * cache.xhat.at(i, j);
            dgamma[static_cast<size_t>(j)] += dy.at(i, j) * cache.xhat.at(i, j);
            dbeta[static_cast<size_t>(j)] += dy.at(i, j);
        }
        m1 /= d;
        m2 /= d;
        const double rstd = cache.rstd[static_cast<size_t>(i)];
        for (int j = 0; j < d; ++j) {
            const double g = dy.at(i, j) * gamma[static_cast<size_t>(j)];
            dx.at(i, j) = rstd * (g - m1 - cache.xhat.at(i, j) * m2);
        }
    }
    return dx;
}

struct BlockCache {
    Mat x_in;
    LnCache ln1;
    Mat a, q, k, v;
    std::vector<Mat> attn;  // per head, seq x seq
    Mat ctx, x_mid;
    LnCache ln2;
    Mat f, u, g, x_out;
};

struct ForwardCache {
    Mat x0;
    std::vector<BlockCache> blocks;
    std::vector<double> probs;  // softmax of logits
    std::vector<double> logits;
};

}  // namespace

void ModelConfig::validate() const {
    if (d_e < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 1 || n_classes < 2 ||
        vocab_size < 1)
        throw Error("model config: all dimensions must be positive (n_classes >= 2)");
    if (d_e % n_heads != 0) throw Error("model config: d_e must be divisible by n_heads");
}

std::span<const double> GradientSnapshot::segment(const std::string& name) const {
    for (const auto& s : segments)
        if (s.name == name) return {values.data() + s.offset, s.count};
    throw Error("gradient snapshot: missing segment '" + name + "'");
}

double GradientSnapshot::l2_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

double hidden_state_mse(const HiddenStates& h1, const HiddenStates& h2) {
    if (h1.layers.size() != h2.layers.size())
        throw Error("hidden-state mse: layer count mismatch");
    if (h1.layers.empty()) throw Error("hidden-state mse: empty hidden states");
    double total = 0.0;
    for (size_t l = 0; l < h1.layers.size(); ++l) {
        const Mat& a = h1.layers[l];
        const Mat& b = h2.layers[l];
        if (a.rows != b.rows || a.cols != b.cols)
            throw Error("hidden-state mse: shape mismatch in layer " + std::to_string(l));
        double s = 0.0;
        for (size_t i = 0; i < a.a.size(); ++i) {
            const double d = a.a[i] - b.a[i];
            s += d * d;
        }
        total += s / static_cast<double>(a.a.size());
    }
    return total / static_cast<double>(h1.layers.size());
}

namespace {

std::vector<ParamSegment> build_segments(const ModelConfig& cfg) {
    std::vector<ParamSegment> segs;
    size_t offset = 0;
    auto push = [&](const std::string& name, int rows, int cols) {
        const size_t count = static_cast<size_t>(rows) * cols;
        segs.push_back({name, offset, count, rows, cols});
        offset += count;
    };
    push("embedding", cfg.vocab_size, cfg.d_e);
    push("pos", cfg.max_len, cfg.d_e);
    for (int b = 0; b < cfg.n_layers; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        push(p + "ln1.gamma", 1, cfg.d_e);
        push(p + "ln1.beta", 1, cfg.d_e);
        push(p + "attn.wq", cfg.d_e, cfg.d_e);
        push(p + "attn.bq", 1, cfg.d_e);
        push(p + "attn.wk", cfg.d_e, cfg.d_e);
        push(p + "attn.bk", 1, cfg.d_e);
        push(p + "attn.wv", cfg.d_e, cfg.d_e);
        push(p + "attn.bv", 1, cfg.d_e);
        push(p + "attn.wo", cfg.d_e, cfg.d_e);
        push(p + "attn.bo", 1, cfg.d_e);
        push(p + "ln2.gamma", 1, cfg.d_e);
        push(p + "ln2.beta", 1, cfg.d_e);
        push(p + "ffn.w1", cfg.d_e, cfg.d_ff);
        push(p + "ffn.b1", 1, cfg.d_ff);
        push(p + "ffn.w2", cfg.d_ff, cfg.d_e);
        push(p + "ffn.b2", 1, cfg.d_e);
    }
    push("head.w", cfg.d_e, cfg.n_classes);
    push("head.b", 1, cfg.n_classes);
    return segs;
}

size_t total_params(const std::vector<ParamSegment>& segs) {
    return segs.empty() ? 0 : segs.back().offset + segs.back().count;
}

// view of one segment as a Mat-like accessor into a flat parameter vector
struct SegView {
    const double* data;
    int rows, cols;
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    std::span<const double> flat() const { return {data, static_cast<size_t>(rows) * cols}; }
};

struct SegGrad {
    double* data;
    int rows, cols;
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    std::span<double> flat() { return {data, static_cast<size_t>(rows) * cols}; }
};

Mat matmul_seg(const Mat& A, const SegView& W) {
    Mat C(A.rows, W.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            const double v = A.at(i, k);
            for (int j = 0; j < W.cols; ++j) C.at(i, j) += v * W.at(k, j);
        }
    return C;
}

// C = A * W^T
Mat matmul_seg_t(const Mat& A, const SegView& W) {
    Mat C(A.rows, W.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < W.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += A.at(i, k) * W.at(j, k);
            C.at(i, j) = s;
        }
    return C;
}

// dW += A^T * B
void accumulate_outer(const Mat& A, const Mat& B, SegGrad dW) {
    for (int k = 0; k < A.rows; ++k)
        for (int i = 0; i < A.cols; ++i) {
            const double v = A.at(k, i);
            if (v == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) dW.at(i, j) += v * B.at(k, j);
        }
}

}  // namespace

ToyModel ToyModel::init(const ModelConfig& cfg) {
    cfg.validate();
    ToyModel m;
    m.cfg_ = cfg;
    m.segments_ = build_segments(cfg);
    m.params_.assign(total_params(m.segments_), 0.0);
    Rng rng(cfg.seed);
    for (const auto& seg : m.segments_) {
        double* p = m.params_.data() + seg.offset;
        if (seg.name.find("gamma") != std::string::npos) {
            std::fill(p, p + seg.count, 1.0);
        } else if (seg.name.find("beta") != std::string::npos ||
                   seg.name.find(".b") != std::string::npos) {
            // biases stay zero but the rng stream must not depend on that
            std::fill(p, p + seg.count, 0.0);
        } else if (seg.name == "embedding") {
            for (size_t i = 0; i < seg.count; ++i) p[i] = rng.normal(0.0, 0.5);
        } else if (seg.name == "pos") {
            for (size_t i = 0; i < seg.count; ++i) p[i] = rng.normal(0.0, 0.1);
        } else if (seg.name == "head.w") {
            for (size_t i = 0; i < seg.count; ++i) p[i] = rng.normal(0.0, 0.1);
        } else {
            const double scale = 1.0 / std::sqrt(static_cast<double>(seg.rows));
            for (size_t i = 0; i < seg.count; ++i) p[i] = rng.normal(0.0, scale);
        }
    }
    return m;
}

ToyModel ToyModel::init_with_embeddings(ModelConfig cfg, const EmbeddingTable& table) {
    cfg.vocab_size = static_cast<int>(table.rows());
    cfg.d_e = table.dim;
    ToyModel m = init(cfg);
    auto emb = m.segment("embedding");
    for (size_t i = 0; i < emb.size(); ++i) emb[i] = static_cast<double>(table.matrix[i]);
    return m;
}

std::span<double> ToyModel::segment(const std::string& name) {
    for (const auto& s : segments_)
        if (s.name == name) return {params_.data() + s.offset, s.count};
    throw Error("model: missing segment '" + name + "'");
}

std::span<const double> ToyModel::segment(const std::string& name) const {
    for (const auto& s : segments_)
        if (s.name == name) return {params_.data() + s.offset, s.count};
    throw Error("model: missing segment '" + name + "'");
}

void ToyModel::check_tokens(std::span<const TokenId> tokens) const {
    if (tokens.empty()) throw Error("model: empty token sequence");
    if (static_cast<int>(tokens.size()) > cfg_.max_len)
        throw Error("model: sequence length " + std::to_string(tokens.size()) +
                    " exceeds max_len " + std::to_string(cfg_.max_len));
    for (TokenId t : tokens)
        if (t < 0 || t >= cfg_.vocab_size) throw Error("model: token id out of range");
}

Mat ToyModel::embed(std::span<const TokenId> tokens) const {
    const int L = static_cast<int>(tokens.size());
    const auto emb = segment("embedding");
    const auto pos = segment("pos");
    Mat x(L, cfg_.d_e);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < cfg_.d_e; ++j)
            x.at(i, j) = emb[static_cast<size_t>(tokens[i]) * cfg_.d_e + j] +
                         pos[static_cast<size_t>(i) * cfg_.d_e + j];
    return x;
}

namespace {

// shared forward core; `cache` may be null when only outputs are needed
void run_forward(const ModelConfig& cfg, const std::vector<double>& params,
                 const std::vector<ParamSegment>& segments, const Mat& x0, ForwardCache* cache,
                 HiddenStates* hidden, std::vector<double>* logits_out) {
    auto view = [&](const std::string& name) -> SegView {
        for (const auto& s : segments)
            if (s.name == name) return {params.data() + s.offset, s.rows, s.cols};
        throw Error("model: missing segment '" + name + "'");
    };

    const int L = x0.rows;
    const int d = cfg.d_e;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    if (cache) {
        cache->x0 = x0;
        cache->blocks.resize(static_cast<size_t>(cfg.n_layers));
    }
    if (hidden && cfg.include_embedding_in_hidden) hidden->layers.push_back(x0);

    Mat x = x0;
    for (int b = 0; b < cfg.n_layers; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        BlockCache local;
        BlockCache& bc = cache ? cache->blocks[static_cast<size_t>(b)] : local;
        bc.x_in = x;

        bc.a = layer_norm(x, view(p + "ln1.gamma").flat(), view(p + "ln1.beta").flat(), bc.ln1);
        bc.q = matmul_seg(bc.a, view(p + "attn.wq"));
        add_rowwise(bc.q, view(p + "attn.bq").flat());
        bc.k = matmul_seg(bc.a, view(p + "attn.wk"));
        add_rowwise(bc.k, view(p + "attn.bk").flat());
        bc.v = matmul_seg(bc.a, view(p + "attn.wv"));
        add_rowwise(bc.v, view(p + "attn.bv").flat());

        bc.attn.assign(static_cast<size_t>(H), Mat());
        bc.ctx = Mat(L, d);
        for (int h = 0; h < H; ++h) {
            Mat scores(L, L);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += bc.q.at(i, h * dh + c) * bc.k.at(j, h * dh + c);
                    scores.at(i, j) = s * inv_sqrt_dh;
                }
            // softmax rows
            for (int i = 0; i < L; ++i) {
                double mx = scores.at(i, 0);
                for (int j = 1; j < L; ++j) mx = std::max(mx, scores.at(i, j));
                double z = 0.0;
                for (int j = 0; j < L; ++j) {
                    scores.at(i, j) = std::exp(scores.at(i, j) - mx);
                    z += scores.at(i, j);
                }
                for (int j = 0; j < L; ++j) scores.at(i, j) /= z;
            }
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    const double w = scores.at(i, j);
                    for (int c = 0; c < dh; ++c) bc.ctx.at(i, h * dh + c) += w * bc.v.at(j, h * dh + c);
                }
            bc.attn[static_cast<size_t>(h)] = std::move(scores);
        }

        Mat attn_out = matmul_seg(bc.ctx, view(p + "attn.wo"));
        add_rowwise(attn_out, view(p + "attn.bo").flat());
        bc.x_mid = bc.x_in;
        accumulate(bc.x_mid, attn_out);

        bc.f = layer_norm(bc.x_mid, view(p + "ln2.gamma").flat(), view(p + "ln2.beta").flat(),
                          bc.ln2);
        bc.u = matmul_seg(bc.f, view(p + "ffn.w1"));
        add_rowwise(bc.u, view(p + "ffn.b1").flat());
        bc.g = Mat(L, cfg.d_ff);
        for (size_t i = 0; i < bc.u.a.size(); ++i) bc.g.a[i] = gelu(bc.u.a[i]);
        Mat ffn_out = matmul_seg(bc.g, view(p + "ffn.w2"));
        add_rowwise(ffn_out, view(p + "ffn.b2").flat());
        bc.x_out = bc.x_mid;
        accumulate(bc.x_out, ffn_out);

        if (hidden) hidden->layers.push_back(bc.x_out);
        x = bc.x_out;
    }

    if (logits_out) {
        const SegView wh = view("head.w");
        const SegView bh = view("head.b");
        std::vector<double> logits(static_cast<size_t>(cfg.n_classes), 0.0);
        for (int c = 0; c < cfg.n_classes; ++c) {
            double s = bh.at(0, c);
            for (int j = 0; j < d; ++j) s += x.at(0, j) * wh.at(j, c);
            logits[static_cast<size_t>(c)] = s;
        }
        *logits_out = std::move(logits);
    }
}

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* probs) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    if (probs) {
        probs->resize(logits.size());
        for (size_t i = 0; i < logits.size(); ++i) (*probs)[i] = std::exp(logits[i] - lse);
    }
    return lse - logits[static_cast<size_t>(label)];
}

// backward through the whole stack; returns dx0. `scale` multiplies the loss
// (1/batch_size for a mean over the batch).
Mat run_backward(const ModelConfig& cfg, const std::vector<double>& params,
                 const std::vector<ParamSegment>& segments, const ForwardCache& cache, int label,
                 double scale, std::vector<double>& grad) {
    auto view = [&](const std::string& name) -> SegView {
        for (const auto& s : segments)
            if (s.name == name) return {params.data() + s.offset, s.rows, s.cols};
        throw Error("model: missing segment '" + name + "'");
    };
    auto gview = [&](const std::string& name) -> SegGrad {
        for (const auto& s : segments)
            if (s.name == name) return {grad.data() + s.offset, s.rows, s.cols};
        throw Error("model: missing segment '" + name + "'");
    };

    const int d = cfg.d_e;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const Mat& x_final = cfg.n_layers > 0 ? cache.blocks.back().x_out : cache.x0;
    const int L = x_final.rows;

    // head: logits = x_final[0] . W + b
    std::vector<double> dlogits(static_cast<size_t>(cfg.n_classes));
    for (int c = 0; c < cfg.n_classes; ++c) {
        const double p = cache.probs[static_cast<size_t>(c)];
        dlogits[static_cast<size_t>(c)] = scale * (p - (c == label ? 1.0 : 0.0));
    }
    const SegView wh = view("head.w");
    SegGrad dwh = gview("head.w");
    SegGrad dbh = gview("head.b");
    Mat dx(L, d);
    for (int c = 0; c < cfg.n_classes; ++c) {
        const double dl = dlogits[static_cast<size_t>(c)];
        dbh.at(0, c) += dl;
        for (int j = 0; j < d; ++j) {
            dwh.at(j, c) += x_final.at(0, j) * dl;
            dx.at(0, j) += wh.at(j, c) * dl;
        }
    }

    for (int b = cfg.n_layers - 1; b >= 0; --b) {
        const std::string p = "block" + std::to_string(b) + ".";
        const BlockCache& bc = cache.blocks[static_cast<size_t>(b)];

        // ffn sublayer: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
        Mat dffn_out = dx;  // residual split
        SegGrad db2 = gview(p + "ffn.b2");
        accumulate_colsum(dffn_out, db2.flat());
        accumulate_outer(bc.g, dffn_out, gview(p + "ffn.w2"));
        Mat dg = matmul_seg_t(dffn_out, view(p + "ffn.w2"));
        Mat du(dg.rows, dg.cols);
        for (size_t i = 0; i < du.a.size(); ++i) du.a[i] = dg.a[i] * gelu_grad(bc.u.a[i]);
        SegGrad db1 = gview(p + "ffn.b1");
        accumulate_colsum(du, db1.flat());
        accumulate_outer(bc.f, du, gview(p + "ffn.w1"));
        Mat df = matmul_seg_t(du, view(p + "ffn.w1"));
        Mat dx_mid = layer_norm_backward(df, bc.ln2, view(p + "ln2.gamma").flat(),
                                         gview(p + "ln2.gamma").flat(),
                                         gview(p + "ln2.beta").flat());
        accumulate(dx_mid, dx);  // residual path

        // attention sublayer: x_mid = x_in + (ctx Wo + bo)
        Mat dattn_out = dx_mid;
        SegGrad dbo = gview(p + "attn.bo");
        accumulate_colsum(dattn_out, dbo.flat());
        accumulate_outer(bc.ctx, dattn_out, gview(p + "attn.wo"));
        Mat dctx = matmul_seg_t(dattn_out, view(p + "attn.wo"));

        Mat dq(L, d), dk(L, d), dv(L, d);
        for (int h = 0; h < H; ++h) {
            const Mat& A = bc.attn[static_cast<size_t>(h)];
            // dA = dctx_h V_h^T ; dV_h = A^T dctx_h
            Mat dA(L, L);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += dctx.at(i, h * dh + c) * bc.v.at(j, h * dh + c);
                    dA.at(i, j) = s;
                }
            for (int j = 0; j < L; ++j)
                for (int i = 0; i < L; ++i) {
                    const double w = A.at(i, j);
                    if (w == 0.0) continue;
                    for (int c = 0; c < dh; ++c) dv.at(j, h * dh + c) += w * dctx.at(i, h * dh + c);
                }
            // softmax backward per row
            Mat dS(L, L);
            for (int i = 0; i < L; ++i) {
                double dot = 0.0;
                for (int j = 0; j < L; ++j) dot += dA.at(i, j) * A.at(i, j);
                for (int j = 0; j < L; ++j) dS.at(i, j) = A.at(i, j) * (dA.at(i, j) - dot);
            }
            // S = Q_h K_h^T * inv_sqrt_dh
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    const double s = dS.at(i, j) * inv_sqrt_dh;
                    if (s == 0.0) continue;
                    for (int c = 0; c < dh; ++c) {
                        dq.at(i, h * dh + c) += s * bc.k.at(j, h * dh + c);
                        dk.at(j, h * dh + c) += s * bc.q.at(i, h * dh + c);
                    }
                }
        }

        SegGrad dbq = gview(p + "attn.bq");
        accumulate_colsum(dq, dbq.flat());
        accumulate_outer(bc.a, dq, gview(p + "attn.wq"));
        SegGrad dbk = gview(p + "attn.bk");
        accumulate_colsum(dk, dbk.flat());
        accumulate_outer(bc.a, dk, gview(p + "attn.wk"));
        SegGrad dbv = gview(p + "attn.bv");
        accumulate_colsum(dv, dbv.flat());
        accumulate_outer(bc.a, dv, gview(p + "attn.wv"));

        Mat da = matmul_seg_t(dq, view(p + "attn.wq"));
        accumulate(da, matmul_seg_t(dk, view(p + "attn.wk")));
        accumulate(da, matmul_seg_t(dv, view(p + "attn.wv")));

        Mat dx_in = layer_norm_backward(da, bc.ln1, view(p + "ln1.gamma").flat(),
                                        gview(p + "ln1.gamma").flat(),
                                        gview(p + "ln1.beta").flat());
        accumulate(dx_in, dx_mid);  // residual path
        dx = std::move(dx_in);
    }
    return dx;
}

}  // namespace

ForwardResult ToyModel::forward_hidden_states(std::span<const TokenId> tokens) const {
    check_tokens(tokens);
    ForwardResult out;
    run_forward(cfg_, params_, segments_, embed(tokens), nullptr, &out.hidden, &out.logits);
    return out;
}

double ToyModel::loss_only(std::span<const TokenId> tokens, int label) const {
    check_tokens(tokens);
    if (label < 0 || label >= cfg_.n_classes) throw Error("model: label out of range");
    std::vector<double> logits;
    run_forward(cfg_, params_, segments_, embed(tokens), nullptr, nullptr, &logits);
    return cross_entropy(logits, label, nullptr);
}

std::pair<double, GradientSnapshot> ToyModel::loss_and_gradients(
    const std::vector<LabeledSentence>& batch) const {
    if (batch.empty()) throw Error("model: empty batch");
    GradientSnapshot snap;
    snap.segments = segments_;
    snap.values.assign(params_.size(), 0.0);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        check_tokens(s.tokens);
        if (s.label < 0 || s.label >= cfg_.n_classes) throw Error("model: label out of range");
        ForwardCache cache;
        run_forward(cfg_, params_, segments_, embed(s.tokens), &cache, nullptr, &cache.logits);
        loss += scale * cross_entropy(cache.logits, s.label, &cache.probs);
        Mat dx0 = run_backward(cfg_, params_, segments_, cache, s.label, scale, snap.values);
        // input gradient lands in the looked-up embedding rows and positions
        for (int i = 0; i < dx0.rows; ++i)
            for (int j = 0; j < cfg_.d_e; ++j) {
                snap.values[segments_[0].offset +
                            static_cast<size_t>(s.tokens[static_cast<size_t>(i)]) * cfg_.d_e + j] +=
                    dx0.at(i, j);
                snap.values[segments_[1].offset + static_cast<size_t>(i) * cfg_.d_e + j] +=
                    dx0.at(i, j);
            }
    }
    return {loss, std::move(snap)};
}

std::pair<double, GradientSnapshot> ToyModel::loss_and_gradients_from_rows(const Mat& rows,
                                                                           int label) const {
    if (rows.rows < 1 || rows.rows > cfg_.max_len || rows.cols != cfg_.d_e)
        throw Error("model: bad input row shape");
    if (label < 0 || label >= cfg_.n_classes) throw Error("model: label out of range");
    Mat x0 = rows;
    const auto pos = segment("pos");
    for (int i = 0; i < x0.rows; ++i)
        for (int j = 0; j < cfg_.d_e; ++j) x0.at(i, j) += pos[static_cast<size_t>(i) * cfg_.d_e + j];
    GradientSnapshot snap;
    snap.segments = segments_;
    snap.values.assign(params_.size(), 0.0);
    ForwardCache cache;
    run_forward(cfg_, params_, segments_, x0, &cache, nullptr, &cache.logits);
    const double loss = cross_entropy(cache.logits, label, &cache.probs);
    Mat dx0 = run_backward(cfg_, params_, segments_, cache, label, 1.0, snap.values);
    // positions still receive input gradient; the embedding table was bypassed
    for (int i = 0; i < dx0.rows; ++i)
        for (int j = 0; j < cfg_.d_e; ++j)
            snap.values[segments_[1].offset + static_cast<size_t>(i) * cfg_.d_e + j] +=
                dx0.at(i, j);
    return {loss, std::move(snap)};
}

void ToyModel::sgd_step(const GradientSnapshot& g, double lr) {
    if (g.values.size() != params_.size())
        throw Error("sgd: gradient length " + std::to_string(g.values.size()) +
                    " does not match parameter length " + std::to_string(params_.size()));
    for (size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * g.values[i];
}

void ToyModel::save(const std::string& path) const {
    nlohmann::json j;
    j["d_e"] = cfg_.d_e;
    j["n_layers"] = cfg_.n_layers;
    j["n_heads"] = cfg_.n_heads;
    j["d_ff"] = cfg_.d_ff;
    j["max_len"] = cfg_.max_len;
    j["n_classes"] = cfg_.n_classes;
    j["vocab_size"] = cfg_.vocab_size;
    j["seed"] = cfg_.seed;
    j["include_embedding_in_hidden"] = cfg_.include_embedding_in_hidden;
    j["param_count"] = params_.size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot write '" + path + "'");
    out << j.dump() << '\n';
    std::vector<float> payload(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) payload[i] = static_cast<float>(params_[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw Error("checkpoint: write failed for '" + path + "'");
}

ToyModel ToyModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw Error("checkpoint: missing header line");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("checkpoint: bad header: ") + e.what());
    }
    ModelConfig cfg;
    cfg.d_e = j.at("d_e").get<int>();
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.max_len = j.at("max_len").get<int>();
    cfg.n_classes = j.at("n_classes").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.include_embedding_in_hidden = j.value("include_embedding_in_hidden", false);
    ToyModel m = init(cfg);
    const size_t count = j.at("param_count").get<size_t>();
    if (count != m.params_.size()) throw Error("checkpoint: parameter count mismatch");
    std::vector<float> payload(count);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
        throw Error("checkpoint: truncated payload");
    for (size_t i = 0; i < count; ++i) m.params_[i] = static_cast<double>(payload[i]);
    return m;
}

double parameter_distance(const ToyModel& a, const ToyModel& b) {
    if (a.params().size() != b.params().size())
        throw Error("parameter distance: model shapes differ");
    double s = 0.0;
    for (size_t i = 0; i < a.params().size(); ++i) {
        const double d = a.params()[i] - b.params()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace ghost
