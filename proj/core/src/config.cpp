#include "s2wat/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace s2wat {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": cannot parse number \"" + value + "\"");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": cannot parse integer \"" + value + "\"");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw UsageError("config key " + key + ": cannot parse boolean \"" + value + "\"");
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& value, std::size_t expect) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_u64("list", item)));
  }
  if (expect && out.size() != expect)
    throw UsageError("expected " + std::to_string(expect) + " comma-separated values, got \"" +
                     value + "\"");
  return out;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  auto triple = [&](std::array<std::size_t, 3>& dst) {
    auto v = parse_size_list(value, 3);
    std::copy(v.begin(), v.end(), dst.begin());
  };
  if (key == "preset") {
    std::size_t keep_seed = seed;
    if (value == "desk") {
      model = ModelConfig::desk();
      crop = 32;
      batch_size = 2;
      total_iters = 50;
      warmup_steps = 10;
      resize_shorter = 0;
    } else if (value == "full") {
      model = ModelConfig::full_scale();
      crop = 224;
      batch_size = 4;
      total_iters = 40000;
      warmup_steps = 4000;
      resize_shorter = 512;
    } else {
      throw UsageError("unknown preset \"" + value + "\" (desk|full)");
    }
    seed = keep_seed;
  } else if (key == "embed_dim") {
    model.encoder.embed_dim = parse_u64(key, value);
    model.decoder = DecoderConfig::mirrored_vgg(model.transfer_dim());
  } else if (key == "blocks_per_stage") {
    triple(model.encoder.blocks);
  } else if (key == "strip_widths") {
    triple(model.encoder.strips);
  } else if (key == "heads_per_stage") {
    triple(model.encoder.heads);
  } else if (key == "transfer_depth") {
    model.transfer_depth = parse_u64(key, value);
  } else if (key == "transfer_heads") {
    model.transfer_heads = parse_u64(key, value);
  } else if (key == "attn_merge_softmax") {
    attn_merge_softmax = parse_bool(key, value);
    model.encoder.merge_softmax = attn_merge_softmax;
  } else if (key == "fusion_mode") {
    model.encoder.fusion = fusion_mode_from_name(value);
  } else if (key == "branch_mode") {
    model.encoder.branches = branch_mode_from_name(value);
  } else if (key == "lambda_content") {
    weights.content = parse_double(key, value);
  } else if (key == "lambda_style") {
    weights.style = parse_double(key, value);
  } else if (key == "lambda_id1") {
    weights.id1 = parse_double(key, value);
  } else if (key == "lambda_id2") {
    weights.id2 = parse_double(key, value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "warmup_steps") {
    warmup_steps = parse_u64(key, value);
  } else if (key == "total_iters") {
    total_iters = parse_u64(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_u64(key, value);
  } else if (key == "crop") {
    crop = parse_u64(key, value);
  } else if (key == "resize_shorter") {
    resize_shorter = parse_u64(key, value);
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_u64(key, value);
  } else if (key == "content_dir") {
    content_dir = value;
  } else if (key == "style_dir") {
    style_dir = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "extractor_mode") {
    if (value != "surrogate" && value != "file")
      throw UsageError("extractor_mode must be surrogate|file, got \"" + value + "\"");
    extractor_mode = value;
  } else if (key == "extractor_weights") {
    extractor_weights = value;
  } else if (key == "extractor_seed") {
    extractor_seed = parse_u64(key, value);
  } else {
    throw UsageError("unknown config key \"" + key + "\"");
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::apply_env() {
  if (const char* env = std::getenv("S2WAT_SEED")) seed = parse_u64("S2WAT_SEED", env);
}

void RunConfig::validate() const {
  model.validate();
  if (weights.content < 0 || weights.style < 0 || weights.id1 < 0 || weights.id2 < 0)
    throw ConfigError("loss weights must be non-negative");
  if (lr <= 0) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (crop < kMinImageExtent)
    throw ConfigError("crop must be at least " + std::to_string(kMinImageExtent));
  if (crop % 2) throw ConfigError("crop must be even");
  if (extractor_mode == "file" && extractor_weights.empty())
    throw ConfigError("extractor_mode=file requires extractor_weights");
}

std::string RunConfig::to_string() const {
  std::ostringstream os;
  auto triple = [](const std::array<std::size_t, 3>& a) {
    return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
  };
  os << "embed_dim=" << model.encoder.embed_dim << "\n"
     << "blocks_per_stage=" << triple(model.encoder.blocks) << "\n"
     << "strip_widths=" << triple(model.encoder.strips) << "\n"
     << "heads_per_stage=" << triple(model.encoder.heads) << "\n"
     << "transfer_depth=" << model.transfer_depth << "\n"
     << "transfer_heads=" << model.transfer_heads << "\n"
     << "attn_merge_softmax=" << (attn_merge_softmax ? 1 : 0) << "\n"
     << "fusion_mode=" << fusion_mode_name(model.encoder.fusion) << "\n"
     << "branch_mode=" << branch_mode_name(model.encoder.branches) << "\n"
     << "lambda_content=" << weights.content << "\n"
     << "lambda_style=" << weights.style << "\n"
     << "lambda_id1=" << weights.id1 << "\n"
     << "lambda_id2=" << weights.id2 << "\n"
     << "lr=" << lr << "\n"
     << "warmup_steps=" << warmup_steps << "\n"
     << "total_iters=" << total_iters << "\n"
     << "batch_size=" << batch_size << "\n"
     << "crop=" << crop << "\n"
     << "resize_shorter=" << resize_shorter << "\n"
     << "checkpoint_every=" << checkpoint_every << "\n"
     << "content_dir=" << content_dir << "\n"
     << "style_dir=" << style_dir << "\n"
     << "out_dir=" << out_dir << "\n"
     << "seed=" << seed << "\n"
     << "extractor_mode=" << extractor_mode << "\n"
     << "extractor_weights=" << extractor_weights << "\n"
     << "extractor_seed=" << extractor_seed << "\n";
  return os.str();
}

}  // namespace s2wat
