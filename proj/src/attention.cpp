#include "ctxf/attention.hpp"

#include <cmath>
#include <string>

#include "ctxf/errors.hpp"

namespace ctxf {

Tensor scaled_scores(const Tensor& q, const Tensor& k) {
    if (q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols()) {
        throw ShapeError("scaled_scores: key dim mismatch, q " + shape_str(q) + " vs k " +
                         shape_str(k));
    }
    return scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
}

Tensor attend(const Tensor& scores, const Tensor& v) {
    if (scores.cols() != v.rows()) {
        throw ShapeError("attend: scores " + shape_str(scores) + " do not match values " +
                         shape_str(v));
    }
    return matmul(softmax_rows(scores), v);
}

Tensor attn(const Tensor& q, const Tensor& k, const Tensor& v) {
    return attend(scaled_scores(q, k), v);
}

AttnResult res_attn(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* prev) {
    Tensor scores = scaled_scores(q, k);
    if (prev != nullptr) {
        if (prev->shape() != scores.shape()) {
            throw ShapeError("res_attn: prev " + shape_str(*prev) + " vs scores " +
                             shape_str(scores));
        }
        scores = add(scores, *prev);
    }
    return {attend(scores, v), scores};
}

Tensor prev_ls(const Tensor& s_prev_resampled, const Tensor& s_cur, const CtxMix& mix) {
    if (s_prev_resampled.shape() != s_cur.shape()) {
        throw ShapeError("prev_ls: shape mismatch " + shape_str(s_prev_resampled) + " vs " +
                         shape_str(s_cur));
    }
    return shift_by(add(scale_by(s_prev_resampled, mix.w_prev), scale_by(s_cur, mix.w_cur)),
                    mix.bias);
}

AttnResult ctx_res_attn(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* prev,
                        const Tensor* prev_ls_term, double alpha) {
    Tensor scores = scaled_scores(q, k);
    if (prev != nullptr) {
        if (prev->shape() != scores.shape()) {
            throw ShapeError("ctx_res_attn: prev " + shape_str(*prev) + " vs scores " +
                             shape_str(scores));
        }
        scores = add(scores, *prev);
    }
    if (alpha != 0.0 && prev_ls_term != nullptr) {
        if (prev_ls_term->shape() != scores.shape()) {
            throw ShapeError("ctx_res_attn: prev_ls term " + shape_str(*prev_ls_term) +
                             " vs scores " + shape_str(scores));
        }
        scores = add(scores, scale(*prev_ls_term, alpha));
    }
    return {attend(scores, v), scores};
}

namespace {

inline double lerp_exact(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

Tensor resample_scores(const Tensor& s_prev, int t_cur) {
    if (s_prev.rank() != 2 || s_prev.rows() != s_prev.cols()) {
        throw ShapeError("resample_scores expects a square matrix, got " + shape_str(s_prev));
    }
    if (t_cur < 1) {
        throw ShapeError("resample_scores: target length must be >= 1");
    }
    const int tp = s_prev.rows();
    if (tp == t_cur) {
        return s_prev;
    }
    // Map output index i to u = i/(t_cur-1) in [0,1], then to tp's grid.
    auto src = [&](int i) {
        if (t_cur == 1) return 0.0;
        return static_cast<double>(i) / (t_cur - 1) * (tp - 1);
    };
    Tensor out = Tensor::zeros({t_cur, t_cur});
    for (int i = 0; i < t_cur; ++i) {
        const double y = src(i);
        const int y0 = std::min(static_cast<int>(y), tp - 1);
        const int y1 = std::min(y0 + 1, tp - 1);
        const double fy = y - y0;
        for (int j = 0; j < t_cur; ++j) {
            const double x = src(j);
            const int x0 = std::min(static_cast<int>(x), tp - 1);
            const int x1 = std::min(x0 + 1, tp - 1);
            const double fx = x - x0;
            const double top = lerp_exact(s_prev.at(y0, x0), s_prev.at(y0, x1), fx);
            const double bot = lerp_exact(s_prev.at(y1, x0), s_prev.at(y1, x1), fx);
            out.at(i, j) = lerp_exact(top, bot, fy);
        }
    }
    return out;
}

std::vector<Tensor> resample_scores(const std::vector<Tensor>& heads, int t_cur) {
    std::vector<Tensor> out;
    out.reserve(heads.size());
    for (const Tensor& h : heads) {
        out.push_back(resample_scores(h, t_cur));
    }
    return out;
}

namespace {

void check_mha_params(const MhaParams& p, const Tensor& x_q) {
    if (p.heads() < 1) {
        throw ShapeError("mha: no heads configured");
    }
    if (p.wq.size() != p.wk.size() || p.wq.size() != p.wv.size()) {
        throw ShapeError("mha: inconsistent per-head parameter counts");
    }
    if (x_q.cols() != p.wq[0].rows()) {
        throw ShapeError("mha: input " + shape_str(x_q) + " vs projection " +
                         shape_str(p.wq[0]));
    }
}

}  // namespace

MhaOutput mha(const Tensor& x_q, const Tensor& x_k, const Tensor& x_v, const MhaParams& p,
              const Tensor* mask) {
    return ctx_res_mha(x_q, x_k, x_v, p, nullptr, nullptr, nullptr, 0.0, mask);
}

MhaOutput ctx_res_mha(const Tensor& x_q, const Tensor& x_k, const Tensor& x_v,
                      const MhaParams& p, const std::vector<Tensor>* prev,
                      const std::vector<Tensor>* ctx_resampled, const CtxMix* mix, double alpha,
                      const Tensor* mask) {
    check_mha_params(p, x_q);
    const int heads = p.heads();
    if (prev != nullptr && static_cast<int>(prev->size()) != heads) {
        throw ShapeError("ctx_res_mha: prev has " + std::to_string(prev->size()) +
                         " heads, expected " + std::to_string(heads));
    }
    if (ctx_resampled != nullptr && static_cast<int>(ctx_resampled->size()) != heads) {
        throw ShapeError("ctx_res_mha: ctx has " + std::to_string(ctx_resampled->size()) +
                         " heads, expected " + std::to_string(heads));
    }
    std::vector<Tensor> head_outputs;
    std::vector<Tensor> head_scores;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    head_scores.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        const Tensor q = matmul(x_q, p.wq[hs]);
        const Tensor k = matmul(x_k, p.wk[hs]);
        const Tensor v = matmul(x_v, p.wv[hs]);
        // The mask rides in through the prev slot so it reaches the shared
        // score assembly inside ctx_res_attn. Mask and score chaining never
        // co-occur (the mask is decoder-side, the chain encoder-side).
        const Tensor* prev_ptr = prev ? &(*prev)[hs] : nullptr;
        Tensor combined_prev;
        if (mask != nullptr) {
            combined_prev = prev_ptr ? add(*mask, *prev_ptr) : *mask;
            prev_ptr = &combined_prev;
        }
        Tensor term;
        const Tensor* term_ptr = nullptr;
        if (ctx_resampled != nullptr && mix != nullptr && alpha != 0.0) {
            // s_cur of the mix is this layer's raw scaled scores; the extra
            // node double-counts nothing (gradient correctly sums both paths).
            term = prev_ls((*ctx_resampled)[hs], scaled_scores(q, k), *mix);
            term_ptr = &term;
        }
        AttnResult r = ctx_res_attn(q, k, v, prev_ptr, term_ptr, alpha);
        head_outputs.push_back(r.output);
        head_scores.push_back(r.scores);
    }
    Tensor out = matmul(concat_cols(head_outputs), p.wo);
    return {out, std::move(head_scores)};
}

}  // namespace ctxf
