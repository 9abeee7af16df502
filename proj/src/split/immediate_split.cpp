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

#include "ropscrub/split/immediate_split.hpp"

#include <array>
#include <limits>
#include <sstream>

#include "ropscrub/error.hpp"
#include "ropscrub/isa/encoder.hpp"
#include "ropscrub/isa/forbidden.hpp"

namespace ropscrub::split {

using isa::Gpr;
using isa::Immediate;
using isa::Memory;
using isa::Mnemonic;
using isa::Operand;
using isa::Register;
using isa::SubsetInstruction;
using isa::Width;

namespace {

constexpr std::array<Gpr, 6> kScratchOrder = {Gpr::r8, Gpr::r9, Gpr::rcx,
                                               Gpr::rax, Gpr::rsi, Gpr::rdi};

// Candidates 0..2*kLocalSweep walk outward from value/2; after that the
// offsets come from a fixed splitmix64 stream.
constexpr std::int64_t kLocalSweep = 256;
constexpr std::uint64_t kRandomBudget = 1u << 16;
constexpr std::uint64_t kSeed = 0x726f707363727562ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mask_for(Width w) {
  return w == Width::b64 ? ~0ULL : ((1ULL << isa::bits(w)) - 1);
}

bool fits_int32(std::int64_t v) {
  return v >= std::numeric_limits<std::int32_t>::min() &&
         v <= std::numeric_limits<std::int32_t>::max();
}

std::string describe(const SplitRequest& req) {
  std::ostringstream os;
  os << "value=0x" << std::hex << static_cast<std::uint64_t>(req.value) << std::dec
     << " width=" << isa::bits(req.width) << (req.sign_extended ? " (imm32 sign-extended)" : "");
  try {
    os << " in '" << isa::format_att(req.context) << "'";
  } catch (...) {
  }
  return os.str();
}

// The operand-size-specific value the request stands for, normalised:
// unsigned W-bit for 8/16/32, signed for sign-extended 64, raw for imm64.
std::int64_t normalise(const SplitRequest& req) {
  if (req.width == Width::b64) {
    if (req.sign_extended && !fits_int32(req.value))
      throw Error(ErrorCode::InvalidArgument,
                  "sign-extended imm32 out of range: " + describe(req));
    return req.value;
  }
  if (!isa::immediate_fits(req.value, req.width))
    throw Error(ErrorCode::InvalidArgument, "immediate does not fit its width: " + describe(req));
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(req.value) & mask_for(req.width));
}

struct Candidate {
  std::int64_t a;
  std::int64_t b;
};

// k-th (part_a, part_b) pair to try, or nullopt when the pair is not
// representable (sign-extended parts must both fit an imm32).
std::optional<Candidate> candidate(std::uint64_t k, std::int64_t value, Width w,
                                   bool sign_extended) {
  std::int64_t delta;
  bool random = k > static_cast<std::uint64_t>(2 * kLocalSweep);
  if (!random) {
    auto step = static_cast<std::int64_t>((k + 1) / 2);
    delta = (k % 2 == 1) ? step : -step;
  } else {
    delta = static_cast<std::int64_t>(splitmix64(kSeed ^ k));
  }

  if (w == Width::b64 && sign_extended) {
    std::int64_t half = value >> 1;  // floor(value / 2)
    std::int64_t b = random ? static_cast<std::int32_t>(delta) : half + delta;
    if (!fits_int32(b)) return std::nullopt;
    std::int64_t a = value - b;
    if (!fits_int32(a)) return std::nullopt;
    return Candidate{a, b};
  }

  const std::uint64_t mask = mask_for(w);
  const auto v = static_cast<std::uint64_t>(value) & mask;
  const std::uint64_t half = v >> 1;
  const std::uint64_t b = (half + static_cast<std::uint64_t>(delta)) & mask;
  const std::uint64_t a = (v - b) & mask;
  return Candidate{static_cast<std::int64_t>(a), static_cast<std::int64_t>(b)};
}

bool conflicts(Gpr g, const Operand& op) {
  if (auto* r = std::get_if<Register>(&op)) return r->gpr == g;
  if (auto* m = std::get_if<Memory>(&op)) return m->uses(g);
  return false;
}

bool encodes_clean(std::span<const SubsetInstruction> seq) {
  try {
    return isa::is_clean(isa::encode_all(seq));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnsupportedInstruction) return false;
    throw;
  }
}

Operand adjust_for_push(const Operand& dst, std::int64_t shift) {
  if (auto* m = std::get_if<Memory>(&dst)) {
    if (!m->rip_relative && m->base && m->base->gpr == Gpr::rsp) {
      Memory moved = *m;
      moved.disp += shift;
      return moved;
    }
  }
  return dst;
}

bool is_split_op(Mnemonic m) {
  switch (m) {
    case Mnemonic::mov: case Mnemonic::movabs: case Mnemonic::add: case Mnemonic::sub:
    case Mnemonic::and_: case Mnemonic::or_: case Mnemonic::xor_: case Mnemonic::cmp:
    case Mnemonic::test:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::span<const Gpr> default_scratch_order() { return kScratchOrder; }

std::size_t immediate_field_size(Width width, bool sign_extended) {
  if (width == Width::b64) return sign_extended ? 4 : 8;
  return isa::bytes(width);
}

std::vector<std::uint8_t> render_immediate(std::int64_t value, std::size_t size) {
  std::vector<std::uint8_t> out(size);
  auto u = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<std::uint8_t>(u >> (8 * i));
  return out;
}

bool needs_split(std::uint64_t value, unsigned width_bits) {
  for (unsigned i = 0; i < width_bits / 8; ++i)
    if (isa::is_forbidden(static_cast<std::uint8_t>(value >> (8 * i)))) return true;
  return false;
}

SplitPlan split_immediate(const SplitRequest& req) {
  if (!is_split_op(req.context.op))
    throw Error(ErrorCode::UnsupportedInstruction,
                "only mov/add/sub/and/or/xor/cmp/test immediates are re-encoded: " + describe(req));
  if (!req.context.dst || std::holds_alternative<Immediate>(*req.context.dst))
    throw Error(ErrorCode::InvalidArgument, "context needs a register or memory destination");
  if (req.width == Width::b64 && !req.sign_extended &&
      !(std::holds_alternative<Register>(*req.context.dst) &&
        (req.context.op == Mnemonic::mov || req.context.op == Mnemonic::movabs)))
    throw Error(ErrorCode::UnsupportedInstruction, "imm64 only exists for mov to a register");

  const std::int64_t value = normalise(req);
  const std::size_t field = immediate_field_size(req.width, req.sign_extended);
  const bool imm64 = req.width == Width::b64 && !req.sign_extended;
  const Operand& dst = *req.context.dst;

  SplitPlan plan;
  plan.width = req.width;
  plan.sign_extended = req.sign_extended;

  if (isa::is_clean(render_immediate(value, field))) {
    plan.part_a = value;
    plan.part_b = 0;
    plan.emitted.push_back(req.context);
    plan.warning = "immediate holds no ret-family byte; no split needed";
    return plan;
  }

  const std::int64_t shift = 8 + req.red_zone;
  bool any_scratch_usable = false;

  for (Gpr g : req.scratch_order) {
    if (g == Gpr::rsp || conflicts(g, dst)) continue;
    const Register scratch64 = isa::reg(g, Width::b64);
    const Register scratch = isa::reg(g, imm64 ? Width::b64 : req.width);

    std::vector<SubsetInstruction> head, tail;
    if (req.red_zone > 0) head.push_back(isa::make_adjust_rsp(-req.red_zone));
    head.push_back(isa::make_push(g));
    head.push_back(isa::make_pushfq());

    SubsetInstruction op;
    if (imm64) {
      op = isa::make_binary(Mnemonic::add, Width::b64, dst, scratch64);
    } else {
      op = req.context;
      op.op = req.context.op == Mnemonic::movabs ? Mnemonic::mov : req.context.op;
      op.dst = adjust_for_push(dst, shift);
      op.src = scratch;
    }
    if (imm64) {
      tail.push_back(op);
      tail.push_back(isa::make_popfq());
    } else {
      tail.push_back(isa::make_popfq());
      tail.push_back(op);
    }
    tail.push_back(isa::make_pop(g));
    if (req.red_zone > 0) tail.push_back(isa::make_adjust_rsp(req.red_zone));

    if (!encodes_clean(head) || !encodes_clean(tail)) continue;
    any_scratch_usable = true;

    const std::uint64_t budget = 2 * kLocalSweep + 1 + kRandomBudget;
    for (std::uint64_t k = 0; k < budget; ++k) {
      auto c = candidate(k, value, req.width, req.sign_extended);
      if (!c) continue;
      if (!isa::is_clean(render_immediate(c->a, field)) ||
          !isa::is_clean(render_immediate(c->b, field)))
        continue;

      std::array<SubsetInstruction, 2> body;
      if (imm64) {
        body[0] = {Mnemonic::movabs, Width::b64, Operand{scratch64}, Operand{Immediate{c->a}}};
        body[1] = {Mnemonic::movabs, Width::b64, dst, Operand{Immediate{c->b}}};
      } else {
        body[0] = {Mnemonic::mov, req.width, Operand{scratch}, Operand{Immediate{c->a}}};
        body[1] = {Mnemonic::add, req.width, Operand{scratch}, Operand{Immediate{c->b}}};
      }
      if (!encodes_clean(body)) continue;

      plan.part_a = c->a;
      plan.part_b = c->b;
      plan.scratch = scratch;
      plan.emitted = head;
      if (imm64) {
        // movabs both parts first, then save flags around the add.
        plan.emitted.pop_back();
        plan.emitted.push_back(body[0]);
        plan.emitted.push_back(body[1]);
        plan.emitted.push_back(isa::make_pushfq());
      } else {
        plan.emitted.insert(plan.emitted.end(), body.begin(), body.end());
      }
      plan.emitted.insert(plan.emitted.end(), tail.begin(), tail.end());
      return plan;
    }
  }

  if (!any_scratch_usable)
    throw Error(ErrorCode::ScratchExhausted, "no scratch register gives a clean sequence: " +
                                                 describe(req));
  throw Error(ErrorCode::NoCleanSplit, "no clean split found: " + describe(req));
}

}  // namespace ropscrub::split
