// Copyright 2026 The ropscrub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ropscrub/rewrite/passes.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>

#include "ropscrub/error.hpp"
#include "ropscrub/isa/encoder.hpp"

namespace ropscrub::rewrite {

using isa::Mnemonic;
using isa::Width;

namespace {

struct MnemonicForm {
  Mnemonic op;
  std::optional<Width> width;
};

std::optional<MnemonicForm> split_mnemonic(std::string_view m) {
  static constexpr std::array<std::pair<std::string_view, Mnemonic>, 9> kBases = {{
      {"movabs", Mnemonic::movabs}, {"mov", Mnemonic::mov}, {"add", Mnemonic::add},
      {"sub", Mnemonic::sub},       {"and", Mnemonic::and_}, {"or", Mnemonic::or_},
      {"xor", Mnemonic::xor_},      {"cmp", Mnemonic::cmp},  {"test", Mnemonic::test},
  }};
  for (auto [base, op] : kBases) {
    if (m == base) return MnemonicForm{op, std::nullopt};
    if (m.size() == base.size() + 1 && m.starts_with(base)) {
      if (auto w = isa::width_from_suffix(m.back())) return MnemonicForm{op, w};
    }
  }
  return std::nullopt;
}

bool fits_int32(std::int64_t v) { return v >= INT32_MIN && v <= INT32_MAX; }

std::string where(const InstructionRecord& r) {
  std::ostringstream os;
  os << "line " << r.line << ": " << r.code;
  return os.str();
}

bool uses_narrow_address(const isa::Memory& m) {
  return (m.base && m.base->width != Width::b64) || (m.index && m.index->width != Width::b64);
}

void move_labels(InstructionRecord& from, InstructionRecord& to) {
  if (from.labels.empty()) return;
  to.labels.insert(to.labels.end(), from.labels.begin(), from.labels.end());
  from.labels.clear();
  from.labels_moved = true;
}

// Appends `seq` in front of `target` (already in `out` order), carrying the
// target's labels onto the first inserted record.
void insert_before(std::vector<InstructionRecord>& out, InstructionRecord& target,
                   const std::vector<isa::SubsetInstruction>& seq) {
  bool first = true;
  for (const auto& s : seq) {
    auto rec = make_synthesized(s);
    if (first) move_labels(target, rec);
    first = false;
    out.push_back(std::move(rec));
  }
}

bool mentions(const InstructionRecord& r, isa::Gpr g) {
  for (auto w : {Width::b64, Width::b32, Width::b16, Width::b8}) {
    auto name = "%" + isa::register_name(isa::reg(g, w));
    if (r.code.find(name) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::vector<isa::SubsetInstruction> canary_pair(const RewriteOptions& opts, isa::Gpr key) {
  return {isa::make_mov_seg(opts.canary_segment, opts.canary_offset, key),
          isa::make_xor_stack_top(key)};
}

FunctionSpan pass_reencode_immediates(const FunctionSpan& fn, const RewriteOptions& opts,
                                      PassReport& report) {
  FunctionSpan out = fn;
  out.body.clear();

  auto skip = [&](InstructionRecord& r, std::string why) {
    report.immediates_skipped++;
    report.warnings.push_back(fn.name + ": " + where(r) + ": " + why);
    out.body.push_back(std::move(r));
  };

  for (InstructionRecord r : fn.body) {
    auto form = r.kind == RecordKind::instruction && !r.synthesized
                    ? split_mnemonic(r.mnemonic)
                    : std::nullopt;
    if (!form || r.operands.size() != 2) {
      out.body.push_back(std::move(r));
      continue;
    }
    if (auto* sym = std::get_if<OtherOperand>(&r.operands[0]); sym && sym->text.starts_with("$")) {
      report.warnings.push_back(fn.name + ": " + where(r) +
                                ": symbolic immediate is resolved at link time; not checked");
      out.body.push_back(std::move(r));
      continue;
    }
    auto* imm = std::get_if<isa::Immediate>(&r.operands[0]);
    auto* dst_reg = std::get_if<isa::Register>(&r.operands[1]);
    auto* dst_mem = std::get_if<isa::Memory>(&r.operands[1]);
    if (!imm || (!dst_reg && !dst_mem)) {
      out.body.push_back(std::move(r));
      continue;
    }

    std::optional<Width> width = form->width;
    if (dst_reg) {
      if (width && *width != dst_reg->width) {
        out.body.push_back(std::move(r));
        continue;
      }
      width = dst_reg->width;
    }
    const std::int64_t value = imm->value;
    if (!width) {
      if (split::needs_split(static_cast<std::uint64_t>(value), 32))
        skip(r, "memory destination without a size suffix");
      else
        out.body.push_back(std::move(r));
      continue;
    }

    bool sign_extended = false;
    bool dirty = false;
    if (*width == Width::b64) {
      const bool imm64 = form->op == Mnemonic::movabs ||
                         (form->op == Mnemonic::mov && dst_reg && !fits_int32(value));
      if (!imm64 && !fits_int32(value)) {
        out.body.push_back(std::move(r));
        continue;
      }
      sign_extended = !imm64;
      dirty = split::needs_split(static_cast<std::uint64_t>(value), imm64 ? 64 : 32);
    } else {
      if (!isa::immediate_fits(value, *width)) {
        out.body.push_back(std::move(r));
        continue;
      }
      dirty = split::needs_split(static_cast<std::uint64_t>(value), isa::bits(*width));
    }
    if (!dirty) {
      out.body.push_back(std::move(r));
      continue;
    }

    if (dst_reg && dst_reg->gpr == isa::Gpr::rsp) {
      skip(r, "destination is the stack pointer");
      continue;
    }
    if (dst_mem && uses_narrow_address(*dst_mem)) {
      skip(r, "32-bit address registers are not supported");
      continue;
    }
    if (!r.prefixes.empty()) {
      skip(r, "prefixed instruction left as written");
      continue;
    }

    split::SplitRequest req;
    req.value = value;
    req.width = *width;
    req.sign_extended = sign_extended;
    const isa::Operand dst = dst_reg ? isa::Operand{*dst_reg} : isa::Operand{*dst_mem};
    req.context = isa::make_binary(form->op, *width, dst, isa::Immediate{value});
    req.scratch_order = opts.scratch_order;
    req.red_zone = opts.red_zone;

    split::SplitPlan plan;
    try {
      plan = split::split_immediate(req);
    } catch (const Error& e) {
      if (dst_mem) {
        // The displacement or SIB byte itself may be a ret-family byte; that
        // is not something an immediate split can fix.
        skip(r, std::string("memory destination: ") + e.what());
        continue;
      }
      throw Error(e.code(), fn.name + ": " + where(r) + ": " + e.what());
    }
    insert_before(out.body, r, plan.emitted);
    report.immediates_split++;
  }
  out.analyze();
  return out;
}

FunctionSpan pass_protect_returns(const FunctionSpan& fn, const RewriteOptions& opts,
                                  PassReport& report) {
  FunctionSpan out = fn;
  out.analyze();
  if (!out.has_ret || (!opts.enable_encrypt && !opts.enable_sled)) return out;

  // Split-off parts (foo.cold) are entered by a jump from the hot part,
  // which already encrypted the return address.
  const bool fragment = out.name.find(".cold") != std::string::npos;

  std::size_t entry = out.body.size();
  for (std::size_t i = 0; i < out.body.size(); ++i) {
    if (!out.body[i].is_code()) continue;
    entry = i;
    const auto& m = out.body[i].mnemonic;
    if (m == "endbr64" || m == "endbr32") entry = i + 1;
    break;
  }

  std::vector<isa::SubsetInstruction> sled(opts.sled_length, isa::make_nop());
  std::vector<std::size_t> tails(out.tail_jumps.begin(), out.tail_jumps.end());
  auto is_tail = [&](std::size_t i) {
    return std::find(tails.begin(), tails.end(), i) != tails.end();
  };

  std::vector<InstructionRecord> body;
  body.reserve(out.body.size() + 8);
  for (std::size_t i = 0; i < out.body.size(); ++i) {
    InstructionRecord r = out.body[i];
    if (i == entry && opts.enable_encrypt && !fragment)
      insert_before(body, r, canary_pair(opts, opts.key_register));

    if (r.kind == RecordKind::instruction && is_ret_family(r.mnemonic)) {
      std::vector<isa::SubsetInstruction> seq;
      if (opts.enable_sled) seq = sled;
      if (opts.enable_encrypt) {
        auto pair = canary_pair(opts, opts.key_register);
        seq.insert(seq.end(), pair.begin(), pair.end());
      }
      insert_before(body, r, seq);
      report.rets_protected++;
    } else if (is_tail(i) && opts.enable_encrypt) {
      auto key = mentions(r, opts.key_register) ? opts.key_fallback : opts.key_register;
      std::vector<isa::SubsetInstruction> seq;
      if (opts.enable_sled) seq = sled;
      auto pair = canary_pair(opts, key);
      seq.insert(seq.end(), pair.begin(), pair.end());
      insert_before(body, r, seq);
      report.tail_jumps_protected++;
    } else if (r.kind == RecordKind::instruction && is_conditional_jump(r.mnemonic) &&
               r.operands.size() == 1) {
      auto* t = std::get_if<OtherOperand>(&r.operands[0]);
      if (t && !t->text.starts_with("*") && !is_local_label(branch_symbol(t->text))) {
        bool own = false;
        for (const auto& b : out.body)
          for (const auto& l : b.labels) own = own || l == branch_symbol(t->text);
        if (!own)
          report.warnings.push_back(out.name + ": " + where(r) +
                                    ": conditional jump leaves the function without decrypting");
      }
    }
    body.push_back(std::move(r));
  }
  if (entry == out.body.size() && opts.enable_encrypt && !fragment) {
    // endbr64 was the last code record.
    for (const auto& s : canary_pair(opts, opts.key_register))
      body.push_back(make_synthesized(s));
  }

  if (out.calls_setjmp_family)
    report.warnings.push_back(out.name +
                              ": calls a setjmp-family function; non-local returns are not checked");
  out.body = std::move(body);
  out.analyze();
  report.instrumented = true;
  return out;
}

}  // namespace ropscrub::rewrite
