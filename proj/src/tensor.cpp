#include "ctxf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctxf/errors.hpp"
#include "ctxf/rng.hpp"

namespace ctxf {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw ShapeError("tensor dimensions must be positive, got " + std::to_string(d));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

thread_local Tape* g_active_tape = nullptr;

void require_matrix(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(who) + " expects a matrix, got shape " + shape_str(t));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

}  // namespace

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    if (n != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape product " + std::to_string(n));
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    t.impl_->requires_grad = requires_grad;
    if (requires_grad) {
        t.impl_->grad.assign(n, 0.0);
    }
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

int Tensor::dim(int i) const {
    if (i < 0 || i >= rank()) {
        throw ShapeError("dim index " + std::to_string(i) + " out of range for shape " +
                         shape_str(*this));
    }
    return impl_->shape[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::vector<double>& Tensor::data() const { return impl_->data; }
bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (on) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    } else {
        impl_->grad.clear();
    }
}

std::vector<double>& Tensor::grad() const {
    if (!requires_grad()) {
        throw StateError("grad() on a tensor that does not require grad");
    }
    return impl_->grad;
}

void Tensor::zero_grad() const {
    if (requires_grad()) {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item() requires a scalar tensor, got shape " + shape_str(*this));
    }
    return impl_->data[0];
}

double& Tensor::at(int i, int j) const {
    require_matrix(*this, "at");
    return impl_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                       static_cast<std::size_t>(j)];
}

Tensor Tensor::detached_copy() const {
    return Tensor::from_data(impl_->shape, impl_->data, false);
}

std::string shape_str(const Tensor& t) {
    if (!t.defined()) {
        return "[undefined]";
    }
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < t.rank(); ++i) {
        os << (i ? "x" : "") << t.shape()[static_cast<std::size_t>(i)];
    }
    os << "]";
    return os.str();
}

// --- Tape ---------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss));
    }
    if (consumed_) {
        throw StateError("backward called twice on the same tape without reset");
    }
    if (!loss.requires_grad()) {
        throw ContractError("loss was not recorded on a tape (requires_grad is false)");
    }
    consumed_ = true;
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
    }
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoTapeScope::NoTapeScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoTapeScope::~NoTapeScope() { g_active_tape = previous_; }

void backward_all(const Tensor& loss, Tape& tape) { tape.backward(loss); }

// --- op helpers ---------------------------------------------------------------

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) {
        return false;
    }
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) {
            return true;
        }
    }
    return false;
}

Tensor make_output(std::vector<int> shape, std::vector<double> data, bool rec) {
    return Tensor::from_data(std::move(shape), std::move(data), rec);
}

}  // namespace

// --- ops ----------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a.data()[i] + b.data()[i];
    }
    const bool rec = recording({&a, &b});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, b, y]() {
            const auto& g = y.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a.data()[i] - b.data()[i];
    }
    const bool rec = recording({&a, &b});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, b, y]() {
            const auto& g = y.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a.data()[i] * b.data()[i];
    }
    const bool rec = recording({&a, &b});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, b, y]() {
            const auto& g = y.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += b.data()[i] * g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += a.data()[i] * g[i];
            }
        });
    }
    return y;
}

Tensor scale(const Tensor& a, double c) {
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = c * a.data()[i];
    }
    const bool rec = recording({&a});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y, c]() {
            const auto& g = y.grad();
            auto& ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a) + " x " +
                         shape_str(b));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n);
        for (int p = 0; p < k; ++p) {
            const double av = ad[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                                 static_cast<std::size_t>(p)];
            const double* brow = bd + static_cast<std::size_t>(p) * static_cast<std::size_t>(n);
            for (int j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    const bool rec = recording({&a, &b});
    Tensor y = make_output({m, n}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, b, y, m, k, n]() {
            const double* g = y.grad().data();
            if (a.requires_grad()) {
                double* ga = a.grad().data();
                const double* bd2 = b.data().data();
                for (int i = 0; i < m; ++i) {
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = g + static_cast<std::size_t>(i) * n;
                        const double* brow = bd2 + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[static_cast<std::size_t>(i) * k + p] += s;
                    }
                }
            }
            if (b.requires_grad()) {
                double* gb = b.grad().data();
                const double* ad2 = a.data().data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    const double* arow = ad2 + static_cast<std::size_t>(i) * k;
                    for (int p = 0; p < k; ++p) {
                        const double av = arow[p];
                        double* gbrow = gb + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
        }
    }
    const bool rec = recording({&a});
    Tensor y = make_output({n, m}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y, m, n]() {
            auto& ga = a.grad();
            const auto& g = y.grad();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
                }
            }
        });
    }
    return y;
}

Tensor relu(const Tensor& a) {
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    }
    const bool rec = recording({&a});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y]() {
            auto& ga = a.grad();
            const auto& g = y.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (a.data()[i] > 0.0) ga[i] += g[i];
            }
        });
    }
    return y;
}

Tensor softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    for (double v : x.data()) {
        if (std::isnan(v)) {
            throw NumericError("softmax_rows: NaN in input");
        }
    }
    const int m = x.rows(), n = x.cols();
    std::vector<double> out(x.numel());
    for (int i = 0; i < m; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * n;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= sum;
    }
    const bool rec = recording({&x});
    Tensor y = make_output({m, n}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([x, y, m, n]() {
            auto& gx = x.grad();
            const auto& g = y.grad();
            for (int i = 0; i < m; ++i) {
                const double* yrow = y.data().data() + static_cast<std::size_t>(i) * n;
                const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
                double* gxrow = gx.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
            }
        });
    }
    return y;
}

Tensor log_softmax_rows(const Tensor& x) {
    require_matrix(x, "log_softmax_rows");
    for (double v : x.data()) {
        if (std::isnan(v)) {
            throw NumericError("log_softmax_rows: NaN in input");
        }
    }
    const int m = x.rows(), n = x.cols();
    std::vector<double> out(x.numel());
    for (int i = 0; i < m; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * n;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        for (int j = 0; j < n; ++j) orow[j] = row[j] - lse;
    }
    const bool rec = recording({&x});
    Tensor y = make_output({m, n}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([x, y, m, n]() {
            auto& gx = x.grad();
            const auto& g = y.grad();
            for (int i = 0; i < m; ++i) {
                const double* yrow = y.data().data() + static_cast<std::size_t>(i) * n;
                const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                double gsum = 0.0;
                for (int j = 0; j < n; ++j) gsum += grow[j];
                double* gxrow = gx.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gxrow[j] += grow[j] - std::exp(yrow[j]) * gsum;
            }
        });
    }
    return y;
}

// Post-LN building block: per-row standardization with epsilon inside the
// square root, then the affine gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require_matrix(x, "layer_norm");
    const int t = x.rows(), d = x.cols();
    if (d < 2) {
        throw ShapeError("layer_norm requires feature dim >= 2, got " + shape_str(x));
    }
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
        throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                         shape_str(gain) + " and " + shape_str(bias));
    }
    constexpr double kEps = 1e-5;
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> invstd(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + kEps);
        invstd[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * is;
            xhat[static_cast<std::size_t>(i) * d + j] = h;
            out[static_cast<std::size_t>(i) * d + j] = h * gain.data()[static_cast<std::size_t>(j)] +
                                                       bias.data()[static_cast<std::size_t>(j)];
        }
    }
    const bool rec = recording({&x, &gain, &bias});
    Tensor y = make_output({t, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([x, gain, bias, y, xhat = std::move(xhat),
                               invstd = std::move(invstd), t, d]() {
            const auto& g = y.grad();
            if (bias.requires_grad()) {
                auto& gb = bias.grad();
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < d; ++j) gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
            }
            if (gain.requires_grad()) {
                auto& gg = gain.grad();
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < d; ++j)
                        gg[static_cast<std::size_t>(j)] +=
                            g[static_cast<std::size_t>(i) * d + j] * xhat[static_cast<std::size_t>(i) * d + j];
            }
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (int i = 0; i < t; ++i) {
                    const double is = invstd[static_cast<std::size_t>(i)];
                    double sum_dh = 0.0, sum_dh_xhat = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dh = g[static_cast<std::size_t>(i) * d + j] *
                                          gain.data()[static_cast<std::size_t>(j)];
                        sum_dh += dh;
                        sum_dh_xhat += dh * xhat[static_cast<std::size_t>(i) * d + j];
                    }
                    for (int j = 0; j < d; ++j) {
                        const double dh = g[static_cast<std::size_t>(i) * d + j] *
                                          gain.data()[static_cast<std::size_t>(j)];
                        const double h = xhat[static_cast<std::size_t>(i) * d + j];
                        gx[static_cast<std::size_t>(i) * d + j] +=
                            is * (dh - sum_dh / d - h * sum_dh_xhat / d);
                    }
                }
            }
        });
    }
    return y;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_rows: empty part list");
    }
    const int d = parts[0].cols();
    int rows = 0;
    for (const Tensor& p : parts) {
        require_matrix(p, "concat_rows");
        if (p.cols() != d) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0]) + " vs " +
                             shape_str(p));
        }
        rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rows) * d);
    for (const Tensor& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    bool rec = g_active_tape != nullptr &&
               std::any_of(parts.begin(), parts.end(),
                           [](const Tensor& p) { return p.requires_grad(); });
    Tensor y = make_output({rows, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([parts, y]() {
            const auto& g = y.grad();
            std::size_t off = 0;
            for (const Tensor& p : parts) {
                const std::size_t n = p.numel();
                if (p.requires_grad()) {
                    auto& gp = p.grad();
                    for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        });
    }
    return y;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols: empty part list");
    }
    const int t = parts[0].rows();
    int cols = 0;
    for (const Tensor& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.rows() != t) {
            throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0]) + " vs " +
                             shape_str(p));
        }
        cols += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(t) * cols);
    int col0 = 0;
    for (const Tensor& p : parts) {
        const int pc = p.cols();
        for (int i = 0; i < t; ++i) {
            std::memcpy(out.data() + static_cast<std::size_t>(i) * cols + col0,
                        p.data().data() + static_cast<std::size_t>(i) * pc,
                        static_cast<std::size_t>(pc) * sizeof(double));
        }
        col0 += pc;
    }
    bool rec = g_active_tape != nullptr &&
               std::any_of(parts.begin(), parts.end(),
                           [](const Tensor& p) { return p.requires_grad(); });
    Tensor y = make_output({t, cols}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([parts, y, t, cols]() {
            const auto& g = y.grad();
            int c0 = 0;
            for (const Tensor& p : parts) {
                const int pc = p.cols();
                if (p.requires_grad()) {
                    auto& gp = p.grad();
                    for (int i = 0; i < t; ++i)
                        for (int j = 0; j < pc; ++j)
                            gp[static_cast<std::size_t>(i) * pc + j] +=
                                g[static_cast<std::size_t>(i) * cols + c0 + j];
                }
                c0 += pc;
            }
        });
    }
    return y;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
    require_matrix(a, "slice_rows");
    if (begin < 0 || end > a.rows() || begin >= end) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " + shape_str(a));
    }
    const int d = a.cols(), t = end - begin;
    std::vector<double> out(a.data().begin() + static_cast<std::size_t>(begin) * d,
                            a.data().begin() + static_cast<std::size_t>(end) * d);
    const bool rec = recording({&a});
    Tensor y = make_output({t, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y, begin, t, d]() {
            auto& ga = a.grad();
            const auto& g = y.grad();
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d; ++j)
                    ga[static_cast<std::size_t>(begin + i) * d + j] +=
                        g[static_cast<std::size_t>(i) * d + j];
        });
    }
    return y;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_matrix(x, "add_row_bias");
    const int t = x.rows(), d = x.cols();
    if (bias.rank() != 1 || bias.dim(0) != d) {
        throw ShapeError("add_row_bias: bias " + shape_str(bias) + " vs matrix " + shape_str(x));
    }
    std::vector<double> out(x.numel());
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(i) * d + j] =
                x.data()[static_cast<std::size_t>(i) * d + j] + bias.data()[static_cast<std::size_t>(j)];
    const bool rec = recording({&x, &bias});
    Tensor y = make_output({t, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([x, bias, y, t, d]() {
            const auto& g = y.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (bias.requires_grad()) {
                auto& gb = bias.grad();
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < d; ++j)
                        gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
            }
        });
    }
    return y;
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    require_matrix(table, "embedding_rows");
    if (ids.empty()) {
        throw ContractError("embedding_rows: empty id list");
    }
    const int v = table.rows(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw VocabError("token id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(v));
        }
    }
    const int t = static_cast<int>(ids.size());
    std::vector<double> out(static_cast<std::size_t>(t) * d);
    for (int i = 0; i < t; ++i) {
        std::memcpy(out.data() + static_cast<std::size_t>(i) * d,
                    table.data().data() + static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d,
                    static_cast<std::size_t>(d) * sizeof(double));
    }
    const bool rec = recording({&table});
    Tensor y = make_output({t, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([table, y, ids, t, d]() {
            auto& gt = table.grad();
            const auto& g = y.grad();
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d; ++j)
                    gt[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d + j] +=
                        g[static_cast<std::size_t>(i) * d + j];
        });
    }
    return y;
}

Tensor mean_rows(const Tensor& a) {
    require_matrix(a, "mean_rows");
    const int t = a.rows(), d = a.cols();
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(j)] += a.data()[static_cast<std::size_t>(i) * d + j];
    for (double& v : out) v /= t;
    const bool rec = recording({&a});
    Tensor y = make_output({1, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y, t, d]() {
            auto& ga = a.grad();
            const auto& g = y.grad();
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d; ++j)
                    ga[static_cast<std::size_t>(i) * d + j] += g[static_cast<std::size_t>(j)] / t;
        });
    }
    return y;
}

Tensor broadcast_row(const Tensor& row, int rows) {
    require_matrix(row, "broadcast_row");
    if (row.rows() != 1) {
        throw ShapeError("broadcast_row expects a [1xD] row, got " + shape_str(row));
    }
    if (rows < 1) {
        throw ShapeError("broadcast_row: rows must be >= 1");
    }
    const int d = row.cols();
    std::vector<double> out(static_cast<std::size_t>(rows) * d);
    for (int i = 0; i < rows; ++i)
        std::memcpy(out.data() + static_cast<std::size_t>(i) * d, row.data().data(),
                    static_cast<std::size_t>(d) * sizeof(double));
    const bool rec = recording({&row});
    Tensor y = make_output({rows, d}, std::move(out), rec);
    if (rec) {
        g_active_tape->record([row, y, rows, d]() {
            auto& gr = row.grad();
            const auto& g = y.grad();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < d; ++j)
                    gr[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
        });
    }
    return y;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) {
        throw ShapeError("scale_by: scalar parameter must have one element, got " + shape_str(s));
    }
    const double sv = s.data()[0];
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = sv * a.data()[i];
    const bool rec = recording({&a, &s});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, s, y, sv]() {
            const auto& g = y.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sv * g[i];
            }
            if (s.requires_grad()) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += a.data()[i] * g[i];
                s.grad()[0] += acc;
            }
        });
    }
    return y;
}

Tensor shift_by(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) {
        throw ShapeError("shift_by: scalar parameter must have one element, got " + shape_str(s));
    }
    const double sv = s.data()[0];
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] + sv;
    const bool rec = recording({&a, &s});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, s, y]() {
            const auto& g = y.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (s.requires_grad()) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
                s.grad()[0] += acc;
            }
        });
    }
    return y;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const bool rec = recording({&a});
    Tensor y = make_output({1}, {s}, rec);
    if (rec) {
        g_active_tape->record([a, y]() {
            auto& ga = a.grad();
            const double g = y.grad()[0];
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return y;
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout rate must be in [0,1), got " + std::to_string(rate));
    }
    if (rate == 0.0) {
        return a;
    }
    const double keep = 1.0 - rate;
    const std::size_t n = a.numel();
    std::vector<double> mask(n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
        out[i] = a.data()[i] * mask[i];
    }
    const bool rec = recording({&a});
    Tensor y = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        g_active_tape->record([a, y, mask = std::move(mask)]() {
            auto& ga = a.grad();
            const auto& g = y.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += mask[i] * g[i];
        });
    }
    return y;
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels,
                          double smoothing) {
    require_matrix(logits, "cross_entropy_rows");
    const int t = logits.rows(), v = logits.cols();
    if (static_cast<int>(labels.size()) != t) {
        throw ContractError("cross_entropy_rows: " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(t) + " rows");
    }
    if (smoothing < 0.0 || smoothing >= 1.0) {
        throw ContractError("label smoothing must be in [0,1)");
    }
    for (int id : labels) {
        if (id < 0 || id >= v) {
            throw VocabError("label id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(v));
        }
    }
    // Stable log-softmax, then q = (1-eps)*onehot + eps/V.
    std::vector<double> logp(logits.numel());
    double loss = 0.0;
    for (int i = 0; i < t; ++i) {
        const double* row = logits.data().data() + static_cast<std::size_t>(i) * v;
        double mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        double row_lp_sum = 0.0;
        for (int j = 0; j < v; ++j) {
            logp[static_cast<std::size_t>(i) * v + j] = row[j] - lse;
            row_lp_sum += row[j] - lse;
        }
        loss -= (1.0 - smoothing) * logp[static_cast<std::size_t>(i) * v +
                                         labels[static_cast<std::size_t>(i)]];
        loss -= smoothing / v * row_lp_sum;
    }
    loss /= t;
    const bool rec = recording({&logits});
    Tensor y = make_output({1}, {loss}, rec);
    if (rec) {
        g_active_tape->record([logits, y, labels, logp = std::move(logp), smoothing, t, v]() {
            auto& gl = logits.grad();
            const double g = y.grad()[0];
            for (int i = 0; i < t; ++i) {
                for (int j = 0; j < v; ++j) {
                    const double p = std::exp(logp[static_cast<std::size_t>(i) * v + j]);
                    double q = smoothing / v;
                    if (j == labels[static_cast<std::size_t>(i)]) q += 1.0 - smoothing;
                    gl[static_cast<std::size_t>(i) * v + j] += g * (p - q) / t;
                }
            }
        });
    }
    return y;
}

// --- finite differences --------------------------------------------------------

double finite_diff_check(const std::function<double()>& f, std::span<Tensor> params, double h) {
    if (h <= 0.0) {
        throw ContractError("finite_diff_check: h must be positive");
    }
    const double probe1 = f();
    const double probe2 = f();
    if (std::memcmp(&probe1, &probe2, sizeof(double)) != 0) {
        throw OracleError("finite_diff_check: objective is not deterministic (" +
                          std::to_string(probe1) + " vs " + std::to_string(probe2) + ")");
    }
    double worst = 0.0;
    for (Tensor& p : params) {
        if (!p.requires_grad()) {
            throw ContractError("finite_diff_check: parameter has no gradient buffer");
        }
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double orig = p.data()[i];
            p.data()[i] = orig + h;
            const double fp = f();
            p.data()[i] = orig - h;
            const double fm = f();
            p.data()[i] = orig;
            const double g_fd = (fp - fm) / (2.0 * h);
            const double g_tape = p.grad()[i];
            const double denom = std::max(1e-8, std::abs(g_tape) + std::abs(g_fd));
            worst = std::max(worst, std::abs(g_tape - g_fd) / denom);
        }
    }
    return worst;
}

}  // namespace ctxf
