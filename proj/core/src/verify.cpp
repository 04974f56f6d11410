#include "s2wat/verify.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "s2wat/complexity.hpp"
#include "s2wat/model.hpp"
#include "s2wat/ppm.hpp"
#include "s2wat/synth.hpp"
#include "s2wat/weights_io.hpp"

namespace fs = std::filesystem;

namespace s2wat {

namespace {

TensorD random_tensor(Shape shape, Rng& rng) {
  auto t = TensorD::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

bool check_softmax_rows(Rng& rng) {
  auto x = random_tensor({6, 9}, rng);
  auto y = softmax_lastdim(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double sum = 0;
    for (std::size_t i = 0; i < 9; ++i) sum += y.data()[r * 9 + i];
    if (std::fabs(sum - 1.0) > 1e-6) return false;
  }
  return true;
}

bool check_window_roundtrips(Rng& rng) {
  for (WindowKind kind :
       {WindowKind::kHorizontal, WindowKind::kVertical, WindowKind::kSquare}) {
    WindowGeometry g{kind, 2, 8, 12};
    auto x = random_tensor({8, 12, 5}, rng);
    auto back = window_reverse(window_partition(x, g), g);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x.data()[i] != back.data()[i]) return false;
  }
  return true;
}

bool check_pad_roundtrip(Rng& rng) {
  auto x = random_tensor({7, 9, 4}, rng);
  auto [padded, rec] = pad_grid(x, 3);
  if (padded.dim(0) != 12 || padded.dim(1) != 12) return false;
  auto back = unpad_grid(padded, rec);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x.data()[i] != back.data()[i]) return false;
  return true;
}

bool check_patch_reverse_roundtrip(Rng& rng) {
  auto seq = random_tensor({12, 6}, rng);
  auto chw = patch_reverse(seq, 3, 4);
  for (std::size_t d = 0; d < 6; ++d)
    for (std::size_t i = 0; i < 12; ++i)
      if (chw.data()[d * 12 + i] != seq.data()[i * 6 + d]) return false;
  return true;
}

bool check_attn_merge_oracle(Rng& rng) {
  std::size_t n = 5, d = 7;
  auto x = random_tensor({n, d}, rng);
  auto a = random_tensor({n, d}, rng);
  auto b = random_tensor({n, d}, rng);
  auto c = random_tensor({n, d}, rng);
  auto z = attn_merge(x, a, b, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* cand[4] = {x.data() + i * d, a.data() + i * d, b.data() + i * d,
                             c.data() + i * d};
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0;
      for (int j = 0; j < 4; ++j) {
        double wj = 0;
        for (std::size_t l = 0; l < d; ++l) wj += cand[0][l] * cand[j][l];
        acc += wj * cand[j][k];
      }
      if (std::fabs(acc - z.data()[i * d + k]) > 1e-10) return false;
    }
  }
  return true;
}

bool check_flop_counts() {
  if (measure_attention(AttnKind::kMsa, 8, 8, 0, 8) != flops_msa(8, 8, 8)) return false;
  if (measure_attention(AttnKind::kWmsa, 8, 8, 4, 8) != flops_wmsa(8, 8, 4, 8)) return false;
  auto spw = measure_attention(AttnKind::kSpw, 8, 8, 2, 8);
  auto expect = flops_spw(8, 8, 2, 8);
  double rel = std::fabs(static_cast<double>(spw) - static_cast<double>(expect)) /
               static_cast<double>(expect);
  return rel <= 0.05;
}

bool check_weights_roundtrip(const fs::path& dir, Rng& rng) {
  ParameterStoreT<float> store;
  auto t1 = Tensor::zeros({3, 4});
  auto t2 = Tensor::zeros({5});
  for (std::size_t i = 0; i < t1.size(); ++i) t1.data()[i] = static_cast<float>(rng.uniform());
  for (std::size_t i = 0; i < t2.size(); ++i) t2.data()[i] = static_cast<float>(rng.uniform());
  store.add("a.w", t1);
  store.add("b.bias", t2);
  auto p1 = (dir / "w1.s2wt").string();
  auto p2 = (dir / "w2.s2wt").string();
  save_weights(store, p1);
  save_weights(load_weights(p1), p2);
  return read_file(p1) == read_file(p2);
}

bool check_ppm_roundtrip(const fs::path& dir, Rng& rng) {
  auto img = synth_noise(9, rng);
  auto p1 = (dir / "img1.ppm").string();
  auto p2 = (dir / "img2.ppm").string();
  save_ppm(img, p1);
  save_ppm(load_ppm(p1), p2);
  return read_file(p1) == read_file(p2);
}

bool check_adam_zero_grad() {
  ParameterStoreT<float> store;
  store.add("p", Tensor::from({3}, {1.0f, -2.0f, 3.0f}));
  AdamT<float> adam;
  adam.step(store, 0.1);
  const Tensor& p = *store.find("p");
  return p.data()[0] == 1.0f && p.data()[1] == -2.0f && p.data()[2] == 3.0f;
}

bool check_stylize_determinism() {
  auto model = make_model<float>(ModelConfig::desk(), 11);
  Rng rng(12);
  auto content = synth_gradient(32, rng);
  auto style = synth_checker(32, rng);
  auto a = stylize(model, content, style);
  auto b = stylize(model, content, style);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

}  // namespace

bool run_verify(std::ostream& out) {
  fs::path tmp = fs::temp_directory_path() / "s2wat-verify";
  fs::create_directories(tmp);
  Rng rng(99);

  bool all = true;
  auto report = [&](const char* name, bool ok) {
    out << (ok ? "ok   " : "FAIL ") << name << "\n";
    all = all && ok;
  };
  report("softmax rows sum to one", check_softmax_rows(rng));
  report("window partition/reverse roundtrip", check_window_roundtrips(rng));
  report("grid pad/unpad roundtrip", check_pad_roundtrip(rng));
  report("patch reverse roundtrip", check_patch_reverse_roundtrip(rng));
  report("similarity fusion matches loop oracle", check_attn_merge_oracle(rng));
  report("multiply counter matches analytic counts", check_flop_counts());
  report("weights file roundtrip", check_weights_roundtrip(tmp, rng));
  report("ppm roundtrip", check_ppm_roundtrip(tmp, rng));
  report("adam no-op on zero gradient", check_adam_zero_grad());
  report("stylize determinism", check_stylize_determinism());
  return all;
}

}  // namespace s2wat
