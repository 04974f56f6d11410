#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "s2wat/config.hpp"
#include "s2wat/ppm.hpp"
#include "s2wat/synth.hpp"
#include "s2wat/model.hpp"
#include "s2wat/weights_io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace s2wat;
using namespace s2wat::testing;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "s2wat-test-io";
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("ppm save/load roundtrip is byte-identical") {
  auto dir = temp_dir();
  Rng rng(81);
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t h = 1 + rng.index(20), w = 1 + rng.index(20);
    auto img = Tensor::zeros({3, h, w});
    for (std::size_t i = 0; i < img.size(); ++i)
      img.data()[i] = static_cast<float>(rng.uniform());
    auto p1 = dir / "a.ppm";
    auto p2 = dir / "b.ppm";
    save_ppm(img, p1.string());
    save_ppm(load_ppm(p1.string()), p2.string());
    CHECK(read_file(p1) == read_file(p2));
  }
}

TEST_CASE("ppm quantization: clamping and half-up rounding") {
  auto dir = temp_dir();
  auto img = Tensor::from({3, 1, 2}, {-0.2f, 1.7f, 0.5f, 0.25f, 0.0f, 1.0f});
  auto p = dir / "q.ppm";
  save_ppm(img, p.string());
  auto back = load_ppm(p.string());
  CHECK(back.data()[0] == 0.0f);                          // clamped low
  CHECK(back.data()[1] == 1.0f);                          // clamped high
  CHECK(back.data()[2] == doctest::Approx(128.0 / 255));  // 0.5*255+0.5 floors to 128
  CHECK(bit_identical(quantize_image(img), back));
}

TEST_CASE("ppm parse errors") {
  auto dir = temp_dir();
  write_file(dir / "bad_magic.ppm", "P5\n2 2\n255\nxxxxxxxxxxxx");
  CHECK_THROWS_AS(load_ppm((dir / "bad_magic.ppm").string()), DataError);
  write_file(dir / "bad_maxval.ppm", "P6\n2 2\n65535\n" + std::string(24, 'x'));
  CHECK_THROWS_AS(load_ppm((dir / "bad_maxval.ppm").string()), DataError);
  write_file(dir / "short.ppm", "P6\n4 4\n255\nxx");
  CHECK_THROWS_AS(load_ppm((dir / "short.ppm").string()), DataError);
  CHECK_THROWS_AS(load_ppm((dir / "missing.ppm").string()), DataError);
  // comments in the header are fine
  auto tiny = Tensor::full({3, 1, 1}, 0.4f);
  write_file(dir / "comment.ppm", "P6\n# a comment\n1 1\n255\n" + std::string(3, '\x66'));
  CHECK(load_ppm((dir / "comment.ppm").string()).dim(1) == 1);
}

TEST_CASE("weights file: save/load/save byte-identical, errors structured") {
  auto dir = temp_dir();
  Rng rng(82);
  ParameterStoreT<float> store;
  store.add("encoder.patch_embed.w", random_tensor<float>({12, 8}, rng));
  store.add("encoder.patch_embed.b", random_tensor<float>({8}, rng));
  store.add("decoder.block0.w", random_tensor<float>({4, 8, 3, 3}, rng));

  auto p1 = dir / "w1.s2wt";
  auto p2 = dir / "w2.s2wt";
  save_weights(store, p1.string());
  auto loaded = load_weights(p1.string());
  CHECK(loaded.size() == 3);
  CHECK(loaded.items()[0].first == "encoder.patch_embed.w");  // order preserved
  save_weights(loaded, p2.string());
  CHECK(read_file(p1) == read_file(p2));

  // wrong magic names the expected one
  write_file(dir / "bad.s2wt", "NOPE then garbage");
  try {
    load_weights((dir / "bad.s2wt").string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("S2WT") != std::string::npos);
  }

  // truncation anywhere raises, no partial result
  std::string good = read_file(p1);
  for (std::size_t cut : {4ul, 9ul, 15ul, good.size() - 3}) {
    write_file(dir / "trunc.s2wt", good.substr(0, cut));
    CHECK_THROWS_AS(load_weights((dir / "trunc.s2wt").string()), DataError);
  }
  write_file(dir / "trailing.s2wt", good + "xx");
  CHECK_THROWS_AS(load_weights((dir / "trailing.s2wt").string()), DataError);
}

TEST_CASE("assign_weights validates names and shapes strictly") {
  Rng rng(83);
  ParameterStoreT<float> model;
  model.add("a", random_tensor<float>({2, 2}, rng));
  model.add("b", random_tensor<float>({3}, rng));

  ParameterStoreT<float> loaded;
  loaded.add("a", random_tensor<float>({2, 2}, rng));
  CHECK_THROWS_AS(assign_weights(model, loaded), DataError);  // missing b

  loaded.add("b", random_tensor<float>({4}, rng));
  CHECK_THROWS_AS(assign_weights(model, loaded), DataError);  // shape mismatch

  ParameterStoreT<float> ok;
  ok.add("a", random_tensor<float>({2, 2}, rng));
  ok.add("b", random_tensor<float>({3}, rng));
  ok.add("extra", random_tensor<float>({1}, rng));
  CHECK_THROWS_AS(assign_weights(model, ok), DataError);  // unexpected extra

  ParameterStoreT<float> exact;
  auto wa = random_tensor<float>({2, 2}, rng);
  auto wb = random_tensor<float>({3}, rng);
  exact.add("a", wa);
  exact.add("b", wb);
  assign_weights(model, exact);
  CHECK(bit_identical(*model.find("a"), wa));
  CHECK(bit_identical(*model.find("b"), wb));
}

TEST_CASE("config parsing: defaults, file, overrides, unknown keys") {
  auto dir = temp_dir();
  RunConfig cfg;
  CHECK(cfg.model.encoder.embed_dim == 16);  // desk defaults
  CHECK(cfg.weights.content == 2.0);
  CHECK(cfg.weights.style == 3.0);
  CHECK(cfg.weights.id1 == 50.0);
  CHECK(cfg.weights.id2 == 1.0);

  write_file(dir / "run.cfg",
             "# comment\n"
             "embed_dim = 8\n"
             "strip_widths=1,1,1\n"
             "heads_per_stage=2,2,2\n"
             "lr=0.001\n"
             "seed=5\n");
  cfg.apply_file((dir / "run.cfg").string());
  CHECK(cfg.model.encoder.embed_dim == 8);
  CHECK(cfg.model.decoder.channels.front() == 32);  // decoder follows embed_dim
  CHECK(cfg.lr == doctest::Approx(0.001));
  CHECK(cfg.seed == 5);
  cfg.apply("seed", "9");
  CHECK(cfg.seed == 9);

  CHECK_THROWS_AS(cfg.apply("not_a_key", "1"), UsageError);
  CHECK_THROWS_AS(cfg.apply("lr", "fast"), UsageError);
  CHECK_THROWS_AS(cfg.apply("blocks_per_stage", "1,2"), UsageError);
  CHECK_THROWS_AS(cfg.apply("preset", "huge"), UsageError);

  write_file(dir / "broken.cfg", "lr 0.1\n");
  CHECK_THROWS_AS(cfg.apply_file((dir / "broken.cfg").string()), UsageError);

  // environment override of the seed
  setenv("S2WAT_SEED", "1234", 1);
  cfg.apply_env();
  unsetenv("S2WAT_SEED");
  CHECK(cfg.seed == 1234);

  // preset bundles keep the seed and both presets validate
  cfg.apply("preset", "full");
  CHECK(cfg.model.encoder.embed_dim == 96);
  CHECK(cfg.crop == 224);
  CHECK(cfg.seed == 1234);
  cfg.validate();
  cfg.apply("preset", "desk");
  cfg.validate();

  // the fusion-softmax flag reaches the encoder blocks
  CHECK_FALSE(cfg.model.encoder.merge_softmax);
  cfg.apply("attn_merge_softmax", "1");
  CHECK(cfg.model.encoder.merge_softmax);

  // ablation switches parse and round-trip through the canonical listing
  cfg.apply("fusion_mode", "concat");
  cfg.apply("branch_mode", "vertical");
  CHECK(cfg.model.encoder.fusion == FusionMode::kConcat);
  CHECK(cfg.model.encoder.branches == BranchMode::kVertical);
  CHECK(cfg.to_string().find("fusion_mode=concat") != std::string::npos);
  CHECK_THROWS_AS(cfg.apply("fusion_mode", "average"), UsageError);
  cfg.apply("fusion_mode", "attn_merge");
  cfg.apply("branch_mode", "all");

  // head counts must divide the model dims
  cfg.apply("transfer_heads", "7");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.apply("transfer_heads", "2");
  cfg.apply("heads_per_stage", "5,2,2");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.apply("heads_per_stage", "2,2,2");
  cfg.validate();
}

TEST_CASE("model parameters roundtrip through the weights file") {
  auto dir = temp_dir();
  auto model = make_model<float>(ModelConfig::desk(), 3);
  auto path = dir / "model.s2wt";
  save_weights(model.params, path.string());

  auto fresh = make_model<float>(ModelConfig::desk(), 99);
  assign_weights(fresh.params, load_weights(path.string()));
  auto path2 = dir / "model2.s2wt";
  save_weights(fresh.params, path2.string());
  CHECK(read_file(path) == read_file(path2));

  // every parameter is reachable by name
  for (const auto& [name, t] : model.params.items()) CHECK(fresh.params.find(name) != nullptr);
}

TEST_CASE("full-scale preset constructs and its checkpoint roundtrips") {
  auto cfg = ModelConfig::full_scale();
  cfg.validate();
  auto model = make_model<float>(cfg, 1);
  // full-scale parameter volume sanity: stage dims 96/192/384, 3 transfer layers
  CHECK(model.params.total_elements() > 10'000'000);
  CHECK(model.params.find("encoder.stage3.block1.sq.bias_table") != nullptr);
  CHECK(model.params.find("transfer.layer2.mha.v.w") != nullptr);

  auto dir = temp_dir();
  auto path = dir / "full.s2wt";
  save_weights(model.params, path.string());
  auto loaded = load_weights(path.string());
  CHECK(loaded.size() == model.params.size());
  assign_weights(model.params, loaded);
  fs::remove(path);
}

TEST_CASE("synthetic dataset generation is deterministic and loadable") {
  auto dir = temp_dir() / "data";
  fs::remove_all(dir);
  auto paths = generate_dataset(dir.string(), 4, 32, 11);
  CHECK(paths.size() == 4);
  auto listed = list_ppm_files(dir.string());
  CHECK(listed == paths);
  auto img = load_ppm(paths[0]);
  CHECK(img.shape() == Shape{3, 32, 32});

  auto dir2 = temp_dir() / "data2";
  fs::remove_all(dir2);
  generate_dataset(dir2.string(), 4, 32, 11);
  for (int i = 0; i < 4; ++i) {
    auto a = read_file(paths[i]);
    auto b = read_file(fs::path(dir2) / fs::path(paths[i]).filename());
    CHECK(a == b);
  }
  CHECK_THROWS_AS(list_ppm_files((temp_dir() / "nowhere").string()), DataError);
}

TEST_CASE("resize and crop") {
  Rng rng(84);
  auto img = random_tensor<float>({3, 20, 40}, rng, 0, 1);
  auto resized = resize_shorter_side(img, 10);
  CHECK(resized.dim(1) == 10);
  CHECK(resized.dim(2) == 20);
  auto crop = random_crop(resized, 10, rng);
  CHECK(crop.shape() == Shape{3, 10, 10});
  CHECK_THROWS_AS(random_crop(crop, 12, rng), DataError);
}
