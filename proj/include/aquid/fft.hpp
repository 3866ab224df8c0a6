#pragma once

#include <complex>
#include <mutex>
#include <utility>

#include <fftw3.h>

namespace aquid {

/// Owning handle for an unaligned, estimate-planned FFTW plan. Estimate planning keeps the
/// transform sequence identical from run to run.
class FftPlan {
 public:
  FftPlan() = default;
  explicit FftPlan(fftw_plan p) : plan_(p) {}
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  FftPlan(FftPlan&& o) noexcept : plan_(std::exchange(o.plan_, nullptr)) {}
  FftPlan& operator=(FftPlan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = std::exchange(o.plan_, nullptr);
    }
    return *this;
  }
  ~FftPlan() { reset(); }

  void execute(std::complex<double>* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan_, p, p);
  }

 private:
  void reset() {
    if (plan_) fftw_destroy_plan(plan_);
    plan_ = nullptr;
  }
  fftw_plan plan_ = nullptr;
};

/// In-place forward/backward transforms of an n x n row-major array: batched 1D along x
/// (contiguous), batched 1D along y (strided), and full 2D. Backward transforms are unnormalized.
class FftSet {
 public:
  explicit FftSet(int n) : n_(n) {
    // FFTW planning is not thread-safe; execution of distinct plans is.
    static std::mutex planner;
    std::lock_guard lock(planner);
    fftw_complex* scratch = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    int len[1] = {n};
    x_fwd_ = FftPlan(fftw_plan_many_dft(1, len, n, scratch, nullptr, 1, n, scratch, nullptr, 1, n, FFTW_FORWARD, flags));
    x_bwd_ = FftPlan(fftw_plan_many_dft(1, len, n, scratch, nullptr, 1, n, scratch, nullptr, 1, n, FFTW_BACKWARD, flags));
    y_fwd_ = FftPlan(fftw_plan_many_dft(1, len, n, scratch, nullptr, n, 1, scratch, nullptr, n, 1, FFTW_FORWARD, flags));
    y_bwd_ = FftPlan(fftw_plan_many_dft(1, len, n, scratch, nullptr, n, 1, scratch, nullptr, n, 1, FFTW_BACKWARD, flags));
    xy_fwd_ = FftPlan(fftw_plan_dft_2d(n, n, scratch, scratch, FFTW_FORWARD, flags));
    xy_bwd_ = FftPlan(fftw_plan_dft_2d(n, n, scratch, scratch, FFTW_BACKWARD, flags));
    fftw_free(scratch);
  }

  [[nodiscard]] int n() const { return n_; }
  void forward_x(std::complex<double>* a) const { x_fwd_.execute(a); }
  void backward_x(std::complex<double>* a) const { x_bwd_.execute(a); }
  void forward_y(std::complex<double>* a) const { y_fwd_.execute(a); }
  void backward_y(std::complex<double>* a) const { y_bwd_.execute(a); }
  void forward_2d(std::complex<double>* a) const { xy_fwd_.execute(a); }
  void backward_2d(std::complex<double>* a) const { xy_bwd_.execute(a); }

 private:
  int n_;
  FftPlan x_fwd_, x_bwd_, y_fwd_, y_bwd_, xy_fwd_, xy_bwd_;
};

}  // namespace aquid
