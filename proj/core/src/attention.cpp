#include "s2wat/attention.hpp"

namespace s2wat {

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "attn_merge") return FusionMode::kAttnMerge;
  if (name == "sum") return FusionMode::kSum;
  if (name == "concat") return FusionMode::kConcat;
  throw UsageError("unknown fusion_mode \"" + name + "\" (attn_merge|sum|concat)");
}

BranchMode branch_mode_from_name(const std::string& name) {
  if (name == "all") return BranchMode::kAll;
  if (name == "horizontal") return BranchMode::kHorizontal;
  if (name == "vertical") return BranchMode::kVertical;
  if (name == "square") return BranchMode::kSquare;
  throw UsageError("unknown branch_mode \"" + name + "\" (all|horizontal|vertical|square)");
}

std::string fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::kAttnMerge: return "attn_merge";
    case FusionMode::kSum: return "sum";
    default: return "concat";
  }
}

std::string branch_mode_name(BranchMode m) {
  switch (m) {
    case BranchMode::kAll: return "all";
    case BranchMode::kHorizontal: return "horizontal";
    case BranchMode::kVertical: return "vertical";
    default: return "square";
  }
}

}  // namespace s2wat
