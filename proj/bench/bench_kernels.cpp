// Times the OpenMP kernels against the serial reference implementations and
// verifies they produce identical bits on the same inputs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "cws/kernels.hpp"
#include "cws/nn.hpp"
#include "cws/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using cws::Vec;

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

Vec random_vec(size_t n, cws::Rng& rng) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <typename F>
double time_ms(int reps, F&& f) {
  f();  // warm up
  const double t0 = now_ms();
  for (int r = 0; r < reps; ++r) f();
  return (now_ms() - t0) / reps;
}

uint64_t max_ulp_diff(const Vec& a, const Vec& b) {
  uint64_t worst = 0;
  for (size_t j = 0; j < a.size(); ++j)
    if (a[j] != b[j]) worst = ~uint64_t(0);
  return worst;
}

void bench_matvec(int rows, int cols, int reps) {
  cws::Rng rng(7);
  Vec w = random_vec(size_t(rows) * size_t(cols), rng);
  Vec x = random_vec(size_t(cols), rng);
  Vec y_ref(size_t(rows), 0.0), y_par(size_t(rows), 0.0);

  const double serial =
      time_ms(reps, [&] { cws::kernels::ref::matvec(w.data(), x.data(), y_ref.data(), rows, cols); });
  const double parallel =
      time_ms(reps, [&] { cws::kernels::matvec(w.data(), x.data(), y_par.data(), rows, cols); });
  const bool same = max_ulp_diff(y_ref, y_par) == 0;
  std::printf("matvec       %5dx%-5d  serial %8.3f ms  parallel %8.3f ms  x%.2f  bits %s\n",
              rows, cols, serial, parallel, serial / parallel, same ? "equal" : "DIFFER");
}

void bench_matvec_t_acc(int rows, int cols, int reps) {
  cws::Rng rng(8);
  Vec w = random_vec(size_t(rows) * size_t(cols), rng);
  Vec dy = random_vec(size_t(rows), rng);
  Vec dx_ref(size_t(cols), 0.0), dx_par(size_t(cols), 0.0);

  const double serial = time_ms(reps, [&] {
    std::fill(dx_ref.begin(), dx_ref.end(), 0.0);
    cws::kernels::ref::matvec_t_acc(w.data(), dy.data(), dx_ref.data(), rows, cols);
  });
  const double parallel = time_ms(reps, [&] {
    std::fill(dx_par.begin(), dx_par.end(), 0.0);
    cws::kernels::matvec_t_acc(w.data(), dy.data(), dx_par.data(), rows, cols);
  });
  const bool same = max_ulp_diff(dx_ref, dx_par) == 0;
  std::printf("matvec_t_acc %5dx%-5d  serial %8.3f ms  parallel %8.3f ms  x%.2f  bits %s\n",
              rows, cols, serial, parallel, serial / parallel, same ? "equal" : "DIFFER");
}

void bench_outer_acc(int rows, int cols, int reps) {
  cws::Rng rng(9);
  Vec dy = random_vec(size_t(rows), rng);
  Vec x = random_vec(size_t(cols), rng);
  Vec dw_ref(size_t(rows) * size_t(cols), 0.0), dw_par(dw_ref);

  const double serial = time_ms(reps, [&] {
    cws::kernels::ref::outer_acc(dw_ref.data(), dy.data(), x.data(), rows, cols);
  });
  const double parallel = time_ms(reps, [&] {
    cws::kernels::outer_acc(dw_par.data(), dy.data(), x.data(), rows, cols);
  });
  // accumulating benches drift apart in values; compare one fresh pass
  std::fill(dw_ref.begin(), dw_ref.end(), 0.0);
  std::fill(dw_par.begin(), dw_par.end(), 0.0);
  cws::kernels::ref::outer_acc(dw_ref.data(), dy.data(), x.data(), rows, cols);
  cws::kernels::outer_acc(dw_par.data(), dy.data(), x.data(), rows, cols);
  const bool same = max_ulp_diff(dw_ref, dw_par) == 0;
  std::printf("outer_acc    %5dx%-5d  serial %8.3f ms  parallel %8.3f ms  x%.2f  bits %s\n",
              rows, cols, serial, parallel, serial / parallel, same ? "equal" : "DIFFER");
}

void bench_lstm_step(int input_dim, int hidden_dim, int reps) {
  cws::Rng rng(10);
  cws::LstmCell cell("bench", input_dim, hidden_dim);
  cws::init_lstm(cell, rng);
  Vec x = random_vec(size_t(input_dim), rng);
  Vec h(size_t(hidden_dim), 0.0), c(size_t(hidden_dim), 0.0);
  Vec h2(size_t(hidden_dim), 0.0), c2(size_t(hidden_dim), 0.0);
  const double ms = time_ms(reps, [&] {
    cws::lstm_step(cell, x.data(), h.data(), c.data(), h2.data(), c2.data(), nullptr);
  });
  std::printf("lstm_step    in %4d hid %4d  %8.3f ms per step\n", input_dim, hidden_dim, ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("openmp disabled; parallel kernels fall back to the reference path\n");
#endif
  std::printf("parallel cutoff: %zu elements\n\n", cws::kernels::kParallelCutoff);

  // vocab-sized projection (tied LM softmax) and square recurrent sizes
  bench_matvec(4096, 1024, 50);
  bench_matvec(1200, 1200, 50);
  bench_matvec_t_acc(4096, 1024, 50);
  bench_matvec_t_acc(1200, 1200, 50);
  bench_outer_acc(4096, 1024, 50);
  bench_outer_acc(1200, 1200, 50);
  std::printf("\n");
  bench_lstm_step(1024, 300, 200);
  bench_lstm_step(128, 64, 200);
  return 0;
}
