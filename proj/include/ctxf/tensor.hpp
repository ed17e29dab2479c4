#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctxf {

class Tape;

// Dense fp64 tensor. Copying a Tensor copies the handle, not the storage, so
// the same parameter can appear in many recorded operations and accumulate
// gradient through all of them. Values are immutable by convention once an
// op has consumed the tensor; grad buffers are the only mutated state.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int rank() const;
    int dim(int i) const;
    std::size_t numel() const;
    int rows() const { return dim(0); }
    int cols() const { return dim(1); }

    // Accessors are const and return mutable references: a Tensor is a handle
    // to shared storage, so constness of the handle does not freeze the data.
    std::vector<double>& data() const;
    bool requires_grad() const;
    void set_requires_grad(bool on);

    // Gradient buffer; only valid when requires_grad() is true.
    std::vector<double>& grad() const;
    void zero_grad() const;

    double item() const;  // numel()==1 only
    double& at(int i, int j) const;

    // Values-only copy with no gradient; used for score caches and checkpoints.
    Tensor detached_copy() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    struct Impl {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty unless requires_grad
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

std::string shape_str(const Tensor& t);

// Reverse-mode tape. Ops append their backward rules in creation order,
// which is a topological order by construction; backward() replays them
// in reverse exactly once. Single-writer: one tape, one thread.
class Tape {
  public:
    void record(std::function<void()> rule) { nodes_.push_back(std::move(rule)); }
    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // Seeds d(loss)/d(loss)=1 and propagates to every recorded input.
    // loss must be a scalar produced while this tape was active.
    void backward(const Tensor& loss);

    void reset() {
        nodes_.clear();
        consumed_ = false;
    }

  private:
    std::vector<std::function<void()>> nodes_;
    bool consumed_ = false;
};

// Thread-local active tape. Ops record only while a TapeScope is live and
// some input requires grad; forward passes outside any scope are pure value
// computations (this is the stop-gradient mechanism for history encodes).
Tape* active_tape();

class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

// Suspends recording: forwards inside the scope are pure value computations.
// This is how history utterances are encoded without backpropagation.
class NoTapeScope {
  public:
    NoTapeScope();
    ~NoTapeScope();
    NoTapeScope(const NoTapeScope&) = delete;
    NoTapeScope& operator=(const NoTapeScope&) = delete;

  private:
    Tape* previous_;
};

void backward_all(const Tensor& loss, Tape& tape);

// --- differentiable ops -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);     // bias [D] added to each row
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor mean_rows(const Tensor& a);                            // [T x D] -> [1 x D]
Tensor broadcast_row(const Tensor& row, int rows);            // [1 x D] -> [rows x D]
Tensor scale_by(const Tensor& a, const Tensor& s);            // learnable scalar multiply, s [1]
Tensor shift_by(const Tensor& a, const Tensor& s);            // learnable scalar add, s [1]
Tensor sum_all(const Tensor& a);                              // -> [1]
Tensor dropout(const Tensor& a, double rate, class Rng& rng);

// Mean label-smoothed cross entropy over rows of logits [T x V].
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels,
                          double smoothing);

// --- gradient oracle ---------------------------------------------------------
//
// Central-difference check of already-populated tape gradients. `f` must be a
// deterministic pure-value evaluation of the same objective (run outside any
// tape); each parameter coordinate is perturbed by +-h in place. Returns the
// worst relative error over all coordinates, |g_tape - g_fd| / max(1e-8,
// |g_tape| + |g_fd|). Throws OracleError if f() is not reproducible.
double finite_diff_check(const std::function<double()>& f, std::span<Tensor> params,
                         double h = 1e-6);

}  // namespace ctxf
