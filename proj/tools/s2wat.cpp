// Command-line front end: train, stylize, analyze, bench, gen-data, verify.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "s2wat/analyze.hpp"
#include "s2wat/complexity.hpp"
#include "s2wat/ppm.hpp"
#include "s2wat/synth.hpp"
#include "s2wat/train.hpp"
#include "s2wat/verify.hpp"
#include "s2wat/weights_io.hpp"

namespace fs = std::filesystem;
using namespace s2wat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void print_usage(std::ostream& os) {
  os << "usage: s2wat <command> [options]\n"
        "\n"
        "commands:\n"
        "  train     --content_dir D --style_dir D [--out_dir D] [--key value ...]\n"
        "  stylize   --content F --style F --weights F --out F [--rounds K]\n"
        "  analyze   --content F --style F --outdir D [--weights F]\n"
        "  bench     [--grid 8,16,32] [--window 2,4] [--channels 8,16] [--out F]\n"
        "  gen-data  --out D [--count N] [--size S]\n"
        "  verify\n"
        "\n"
        "options:\n"
        "  --config FILE       flat key=value config file, applied first\n"
        "  --<key> <value>     override any config key (see README)\n"
        "  S2WAT_SEED          environment override for the seed\n";
}

/// Collects --key value pairs; keys not consumed by the command are applied
/// as config overrides.
struct Args {
  std::map<std::string, std::string> kv;
  std::vector<std::string> order;

  std::string take(const std::string& key, const std::string& fallback = "") {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::string v = it->second;
    kv.erase(it);
    return v;
  }

  bool has(const std::string& key) const { return kv.count(key) != 0; }
};

Args parse_args(int argc, char** argv, int start) {
  Args args;
  for (int i = start; i < argc; ++i) {
    std::string a = argv[i];
    if (a.rfind("--", 0) != 0) throw UsageError("expected --key, got \"" + a + "\"");
    std::string key = a.substr(2);
    if (key.empty()) throw UsageError("empty option name");
    if (i + 1 >= argc) throw UsageError("option --" + key + " needs a value");
    std::string value = argv[++i];
    args.kv[key] = value;
    args.order.push_back(key);
  }
  return args;
}

/// defaults < config file < S2WAT_SEED < explicit --key flags.
RunConfig build_config(Args& args) {
  RunConfig cfg;
  std::string config_path = args.take("config");
  if (!config_path.empty()) cfg.apply_file(config_path);
  cfg.apply_env();
  for (const std::string& key : args.order) {
    auto it = args.kv.find(key);
    if (it == args.kv.end()) continue;  // consumed by the command
    cfg.apply(key, it->second);
    args.kv.erase(it);
  }
  return cfg;
}

ModelT<float> load_model(const RunConfig& cfg, const std::string& weights_path) {
  auto model = make_model<float>(cfg.model, cfg.seed);
  if (!weights_path.empty()) assign_weights(model.params, load_weights(weights_path));
  return model;
}

int cmd_train(Args& args) {
  RunConfig cfg = build_config(args);
  auto result = train_run(cfg, &std::cout);
  std::cout << "weights: " << result.weights_path << "\n"
            << "loss log: " << result.log_path << "\n";
  return kExitOk;
}

int cmd_stylize(Args& args) {
  std::string content_path = args.take("content");
  std::string style_path = args.take("style");
  std::string weights_path = args.take("weights");
  std::string out_path = args.take("out");
  std::string rounds_str = args.take("rounds", "1");
  RunConfig cfg = build_config(args);
  if (content_path.empty() || style_path.empty() || out_path.empty())
    throw UsageError("stylize needs --content, --style and --out");
  std::size_t rounds = parse_size_list(rounds_str, 1)[0];
  if (rounds == 0) throw UsageError("--rounds must be at least 1");

  auto model = load_model(cfg, weights_path);
  if (weights_path.empty())
    std::cerr << "note: no --weights given, using seed-initialized parameters\n";
  Tensor content = load_ppm(content_path);
  Tensor style = load_ppm(style_path);

  fs::path base(out_path);
  for (std::size_t r = 1; r <= rounds; ++r) {
    Tensor out = stylize(model, content, style);
    std::string path = out_path;
    if (rounds > 1) {
      fs::path p = base;
      std::string stem = p.stem().string();
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_r%02zu", r);
      p.replace_filename(stem + suffix + p.extension().string());
      path = p.string();
    }
    save_ppm(out, path);
    std::cout << "round " << r << ": " << path << "\n";
    // feed the written (quantized) result back as the next content image
    content = quantize_image(out);
  }
  return kExitOk;
}

int cmd_analyze(Args& args) {
  std::string content_path = args.take("content");
  std::string style_path = args.take("style");
  std::string weights_path = args.take("weights");
  std::string outdir = args.take("outdir");
  RunConfig cfg = build_config(args);
  if (content_path.empty() || style_path.empty() || outdir.empty())
    throw UsageError("analyze needs --content, --style and --outdir");

  auto model = load_model(cfg, weights_path);
  if (weights_path.empty())
    std::cerr << "note: no --weights given, using seed-initialized parameters\n";
  auto res = analyze_model(model, load_ppm(content_path), load_ppm(style_path), outdir);
  std::cout << "content grid " << res.content_grid_h << "x" << res.content_grid_w << ", "
            << res.feature_files.size() << " feature maps, " << res.attention_files.size()
            << " attention heads, " << res.similarity_files.size() << " similarity maps\n"
            << "max attention row-sum error " << res.max_row_sum_error << "\n";
  if (res.max_row_sum_error > 1e-6)
    throw NumericError("attention rows deviate from 1 by " +
                       std::to_string(res.max_row_sum_error));
  return kExitOk;
}

int cmd_bench(Args& args) {
  std::string grid = args.take("grid", "8,16,32");
  std::string window = args.take("window", "2,4");
  std::string channels = args.take("channels", "8,16");
  std::string out_path = args.take("out");
  RunConfig cfg = build_config(args);
  auto rows = run_bench(parse_size_list(grid, 0), parse_size_list(window, 0),
                        parse_size_list(channels, 0), cfg.seed);
  for (const auto& r : rows) {
    if (r.kind == AttnKind::kSpw && std::abs(r.ratio - 1.0) > 0.05) {
      auto t = spw_flop_terms(r.h, r.w, r.m, r.c);
      std::cerr << "warning: spw h=" << r.h << " w=" << r.w << " M=" << r.m << " C=" << r.c
                << " measured " << r.measured << " vs analytic " << r.analytic
                << " (attention " << t.attention << " + projections " << t.projections
                << " + fusion " << t.fusion << ")\n";
    }
  }
  std::string csv = bench_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw DataError("cannot open " + out_path);
    f << csv;
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_gen_data(Args& args) {
  std::string out_dir = args.take("out");
  std::string count = args.take("count", "4");
  std::string size = args.take("size", "32");
  RunConfig cfg = build_config(args);
  if (out_dir.empty()) throw UsageError("gen-data needs --out");
  auto paths = generate_dataset(out_dir, parse_size_list(count, 1)[0],
                                parse_size_list(size, 1)[0], cfg.seed);
  std::cout << "wrote " << paths.size() << " images to " << out_dir << "\n";
  return kExitOk;
}

int cmd_verify(Args& args) {
  build_config(args);  // validates overrides even though none are used
  return run_verify(std::cout) ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  std::string command = argv[1];
  try {
    Args args = parse_args(argc, argv, 2);
    int rc;
    if (command == "train") {
      rc = cmd_train(args);
    } else if (command == "stylize") {
      rc = cmd_stylize(args);
    } else if (command == "analyze") {
      rc = cmd_analyze(args);
    } else if (command == "bench") {
      rc = cmd_bench(args);
    } else if (command == "gen-data") {
      rc = cmd_gen_data(args);
    } else if (command == "verify") {
      rc = cmd_verify(args);
    } else if (command == "--help" || command == "help" || command == "-h") {
      print_usage(std::cout);
      return kExitOk;
    } else {
      std::cerr << "unknown command \"" << command << "\"\n";
      print_usage(std::cerr);
      return kExitUsage;
    }
    if (!args.kv.empty())
      std::cerr << "warning: " << args.kv.size() << " unused option(s)\n";
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const PadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
