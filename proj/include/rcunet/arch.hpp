// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Architecture descriptions for the U-net family: the block grammar, the six
// canonical variants, skip wiring, parameter counting, and receptive-field
// analysis. Specs are plain data; model.hpp turns them into networks.
#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/rnn.hpp"

namespace rcunet {

// --- Layer atoms -----------------------------------------------------------
//
// A processing block is an ordered list of atoms. Channel counts refer to the
// last feature axis of [bands, frames, channels] maps.

// 3x3 same-padded conv -> batchnorm -> ELU.
struct ConvAtom {
  std::int64_t features = 0;
};

// RC pair: BWR sweep -> batchnorm -> concat with input -> 3x3 conv ->
// batchnorm -> ELU. `units` is the total across both directions.
struct RcAtom {
  std::int64_t units = 0;
  Axis axis = Axis::freq;
  std::int64_t features = 0;
};

// 2x2 max pool, ceil semantics at odd edges.
struct PoolAtom {};

// 6x6 stride-2 transposed conv, linear (no batchnorm / activation).
struct TconvAtom {
  std::int64_t features = 0;
};

using LayerAtom = std::variant<ConvAtom, RcAtom, PoolAtom, TconvAtom>;

struct BlockSpec {
  std::vector<LayerAtom> atoms;
};

// mapping: two output maps (clean and noise estimates); irm: one mask map.
enum class OutputMode { mapping, irm };

struct ArchSpec {
  std::string name;
  OutputMode mode = OutputMode::mapping;
  // Blocks 1..L/2 form the encoder, L/2+1..L the decoder (1-based). A 1x1
  // linear conv head after block L produces the output channels.
  std::vector<BlockSpec> blocks;

  std::int64_t num_blocks() const {
    return static_cast<std::int64_t>(blocks.size());
  }
  std::int64_t out_channels() const { return mode == OutputMode::mapping ? 2 : 1; }
  bool has_pooling() const {
    for (const auto& b : blocks)
      for (const auto& a : b.atoms)
        if (std::holds_alternative<PoolAtom>(a)) return true;
    return false;
  }
};

// --- Wiring ------------------------------------------------------------------
//
// Resolves per-block input/output channels and spatial scales, enforcing the
// structural rules. Scale is the downsampling factor relative to the input.

struct BlockWiring {
  std::int64_t in_ch = 0;      // channels entering the block (post skip concat)
  std::int64_t out_ch = 0;     // channels leaving the block
  std::int64_t skip_from = 0;  // 1-based source block of the skip, 0 if none
  std::int64_t scale_in = 1;
  std::int64_t scale_out = 1;
};

inline std::int64_t skip_source(std::int64_t l, std::int64_t L) {
  // Decoder block l in {L/2+2 .. L} concatenates encoder block L+1-l's output.
  return (l >= L / 2 + 2 && l <= L) ? L + 1 - l : 0;
}

template <typename A>
bool block_has(const BlockSpec& b) {
  for (const auto& a : b.atoms)
    if (std::holds_alternative<A>(a)) return true;
  return false;
}

inline std::vector<BlockWiring> wiring(const ArchSpec& spec) {
  const std::int64_t L = spec.num_blocks();
  check(L >= 2 && L % 2 == 0, "arch ", spec.name, ": needs an even number of blocks >= 2, got ", L);
  std::vector<BlockWiring> out(spec.blocks.size());
  std::vector<std::int64_t> ch(L + 1), sc(L + 1);
  ch[0] = 1;  // one input spectrogram channel
  sc[0] = 1;
  for (std::int64_t l = 1; l <= L; ++l) {
    const BlockSpec& block = spec.blocks[l - 1];
    const bool encoder = l <= L / 2;
    BlockWiring& w = out[l - 1];
    w.skip_from = skip_source(l, L);
    w.in_ch = ch[l - 1];
    w.scale_in = sc[l - 1];
    if (w.skip_from > 0) {
      check(sc[w.skip_from] == w.scale_in, "arch ", spec.name, ": block ", l,
            " concatenates block ", w.skip_from, " at scale ", sc[w.skip_from],
            " but runs at scale ", w.scale_in);
      w.in_ch += ch[w.skip_from];
    }
    std::int64_t c = w.in_ch, s = w.scale_in;
    bool has_features = false;
    for (const auto& atom : block.atoms) {
      if (const auto* cv = std::get_if<ConvAtom>(&atom)) {
        check(cv->features > 0, "arch ", spec.name, ": block ", l, ": conv features must be positive");
        c = cv->features;
        has_features = true;
      } else if (const auto* rc = std::get_if<RcAtom>(&atom)) {
        check(rc->units > 0 && rc->units % 2 == 0, "arch ", spec.name, ": block ", l,
              ": recurrent units must be positive and even, got ", rc->units);
        check(rc->features > 0, "arch ", spec.name, ": block ", l, ": RC conv features must be positive");
        c = rc->features;
        has_features = true;
      } else if (std::holds_alternative<PoolAtom>(atom)) {
        check(encoder, "arch ", spec.name, ": block ", l, ": max pooling is encoder-only");
        s *= 2;
      } else if (const auto* tc = std::get_if<TconvAtom>(&atom)) {
        check(!encoder, "arch ", spec.name, ": block ", l, ": transposed conv is decoder-only");
        check(tc->features > 0, "arch ", spec.name, ": block ", l, ": tconv features must be positive");
        check(s % 2 == 0, "arch ", spec.name, ": block ", l, ": transposed conv needs a pooled input");
        s /= 2;
        c = tc->features;
        has_features = true;
      }
    }
    check(has_features, "arch ", spec.name, ": block ", l, " produces no feature map");
    w.out_ch = c;
    w.scale_out = s;
    ch[l] = c;
    sc[l] = s;
  }
  check(sc[L] == 1, "arch ", spec.name, ": output scale is ", sc[L], ", expected 1 (pools must balance tconvs)");
  return out;
}

inline void validate(const ArchSpec& spec) { wiring(spec); }

// --- Text form ---------------------------------------------------------------
//
// Line 1: "unet <mapping|irm>"; one line per block after that. Atom tokens are
// joined with underscores: C<k> conv, R<T|F><u>_C<k> RC pair, MP pool,
// TC<k> transposed conv. '#' starts a comment.

inline std::string block_tokens(const BlockSpec& block) {
  std::string s;
  for (const auto& atom : block.atoms) {
    if (!s.empty()) s += '_';
    if (const auto* cv = std::get_if<ConvAtom>(&atom)) {
      s += 'C' + std::to_string(cv->features);
    } else if (const auto* rc = std::get_if<RcAtom>(&atom)) {
      s += 'R';
      s += rc->axis == Axis::time ? 'T' : 'F';
      s += std::to_string(rc->units) + "_C" + std::to_string(rc->features);
    } else if (std::holds_alternative<PoolAtom>(atom)) {
      s += "MP";
    } else if (const auto* tc = std::get_if<TconvAtom>(&atom)) {
      s += "TC" + std::to_string(tc->features);
    }
  }
  return s;
}

inline std::string arch_to_text(const ArchSpec& spec) {
  std::string s = "unet ";
  s += spec.mode == OutputMode::mapping ? "mapping" : "irm";
  s += '\n';
  for (const auto& block : spec.blocks) s += block_tokens(block) + '\n';
  return s;
}

namespace detail {

inline std::int64_t parse_count(const std::string& token, std::size_t pos) {
  check(pos < token.size(), "arch text: token '", token, "' is missing a number");
  std::int64_t v = 0;
  for (std::size_t i = pos; i < token.size(); ++i) {
    check(token[i] >= '0' && token[i] <= '9', "arch text: bad number in token '", token, "'");
    v = v * 10 + (token[i] - '0');
  }
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

inline BlockSpec parse_block(const std::string& line) {
  BlockSpec block;
  const auto tokens = detail::split(line, '_');
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "MP") {
      block.atoms.push_back(PoolAtom{});
    } else if (t.size() >= 2 && t[0] == 'T' && t[1] == 'C') {
      block.atoms.push_back(TconvAtom{detail::parse_count(t, 2)});
    } else if (t.size() >= 2 && t[0] == 'R' && (t[1] == 'T' || t[1] == 'F')) {
      RcAtom rc;
      rc.units = detail::parse_count(t, 2);
      rc.axis = t[1] == 'T' ? Axis::time : Axis::freq;
      check(i + 1 < tokens.size() && tokens[i + 1].size() >= 2 && tokens[i + 1][0] == 'C',
            "arch text: recurrence token '", t, "' must be followed by a conv token");
      rc.features = detail::parse_count(tokens[i + 1], 1);
      ++i;
      block.atoms.push_back(rc);
    } else if (!t.empty() && t[0] == 'C') {
      block.atoms.push_back(ConvAtom{detail::parse_count(t, 1)});
    } else {
      fail("arch text: unknown token '", t, "'");
    }
  }
  check(!block.atoms.empty(), "arch text: empty block line");
  return block;
}

inline ArchSpec parse_arch(const std::string& text, const std::string& name = "custom") {
  ArchSpec spec;
  spec.name = name;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto words = detail::split(line, ' ');
    if (words.empty()) continue;
    if (!header) {
      check(words.size() == 2 && words[0] == "unet" && (words[1] == "mapping" || words[1] == "irm"),
            "arch text: first line must be 'unet mapping' or 'unet irm'");
      spec.mode = words[1] == "irm" ? OutputMode::irm : OutputMode::mapping;
      header = true;
    } else {
      check(words.size() == 1, "arch text: one block per line, got '", line, "'");
      spec.blocks.push_back(parse_block(words[0]));
    }
  }
  check(header, "arch text: missing 'unet <mode>' header");
  validate(spec);
  return spec;
}

// --- Canonical variants -------------------------------------------------------

// L = 2*levels blocks of RC pairs with axes alternating F,T,F,T,... from
// block 1 through block L.
inline ArchSpec make_all_rc(std::int64_t levels, std::int64_t units, std::int64_t features,
                            OutputMode mode) {
  ArchSpec spec;
  spec.name = "ALL_RC";
  spec.mode = mode;
  for (std::int64_t l = 1; l <= 2 * levels; ++l) {
    RcAtom rc;
    rc.units = units;
    rc.axis = l % 2 == 1 ? Axis::freq : Axis::time;
    rc.features = features;
    spec.blocks.push_back(BlockSpec{{rc}});
  }
  return spec;
}

inline std::vector<std::string> canonical_arch_names() {
  return {"C48", "C64", "C48_C48", "C64_MP", "ALL_RC", "ODD_RC"};
}

inline ArchSpec make_arch(const std::string& name, OutputMode mode) {
  ArchSpec spec;
  spec.name = name;
  spec.mode = mode;
  const std::int64_t L = 10;
  if (name == "C48") {
    for (std::int64_t l = 0; l < L; ++l) spec.blocks.push_back(BlockSpec{{ConvAtom{48}}});
  } else if (name == "C64") {
    for (std::int64_t l = 0; l < L; ++l) spec.blocks.push_back(BlockSpec{{ConvAtom{64}}});
  } else if (name == "C48_C48") {
    for (std::int64_t l = 0; l < L; ++l)
      spec.blocks.push_back(BlockSpec{{ConvAtom{48}, ConvAtom{48}}});
  } else if (name == "C64_MP") {
    // Encoder blocks 1-4 pool after the conv; decoder blocks 7-10 upsample
    // before it. Blocks 5 and 6 run at the coarsest scale.
    for (std::int64_t l = 1; l <= L; ++l) {
      BlockSpec b;
      if (l <= 4) {
        b.atoms = {ConvAtom{64}, PoolAtom{}};
      } else if (l <= 6) {
        b.atoms = {ConvAtom{64}};
      } else {
        b.atoms = {TconvAtom{64}, ConvAtom{64}};
      }
      spec.blocks.push_back(b);
    }
  } else if (name == "ALL_RC") {
    spec = make_all_rc(5, 16, 48, mode);
  } else if (name == "ODD_RC") {
    // RC pairs in blocks 1,3,5,7,9 with axes alternating F,T,F,T,F across the
    // odd positions; plain convs in even blocks.
    for (std::int64_t l = 1; l <= L; ++l) {
      if (l % 2 == 1) {
        RcAtom rc;
        rc.units = 16;
        rc.axis = ((l + 1) / 2) % 2 == 1 ? Axis::freq : Axis::time;
        rc.features = 48;
        spec.blocks.push_back(BlockSpec{{rc}});
      } else {
        spec.blocks.push_back(BlockSpec{{ConvAtom{48}}});
      }
    }
  } else {
    fail("unknown architecture '", name, "'; canonical names: C48, C64, C48_C48, C64_MP, ALL_RC, ODD_RC");
  }
  validate(spec);
  return spec;
}

// --- Analysis ------------------------------------------------------------------

struct ReceptiveField {
  struct AxisField {
    bool full = false;
    std::int64_t extent = 1;  // ignored when full
  };
  AxisField time, freq;
};

inline std::string axis_field_str(const ReceptiveField::AxisField& f) {
  return f.full ? "full" : std::to_string(f.extent);
}

namespace detail {

inline void widen(ReceptiveField::AxisField& f, std::int64_t amount) {
  if (!f.full) f.extent += amount;
}

}  // namespace detail

// Symbolic receptive field: a 3x3 conv adds (2,2) at the current scale, max
// pooling doubles the scale, a transposed conv halves it, and a recurrence
// makes its swept axis full (its conv still widens the other axis). Skip
// paths rejoin with strictly fewer atoms than the straight path, so walking
// the blocks in order accumulates the longest-path total.
inline ReceptiveField receptive_field(const ArchSpec& spec) {
  ReceptiveField rf;
  std::int64_t scale = 1;
  for (const auto& block : spec.blocks) {
    for (const auto& atom : block.atoms) {
      if (std::holds_alternative<ConvAtom>(atom)) {
        detail::widen(rf.time, 2 * scale);
        detail::widen(rf.freq, 2 * scale);
      } else if (const auto* rc = std::get_if<RcAtom>(&atom)) {
        (rc->axis == Axis::time ? rf.time : rf.freq).full = true;
        detail::widen(rf.time, 2 * scale);
        detail::widen(rf.freq, 2 * scale);
      } else if (std::holds_alternative<PoolAtom>(atom)) {
        scale *= 2;
      } else if (std::holds_alternative<TconvAtom>(atom)) {
        scale /= 2;
      }
    }
  }
  return rf;  // the 1x1 head adds nothing
}

// Trainable scalars per atom, mirroring the builder exactly: conv k*k*Ci*Co+Co
// plus 2*Co batchnorm; RC pair adds two GRU directions 3*(Ci*H + H*H + H) with
// H = units/2, 2*units batchnorm on the recurrence output, then a 3x3 conv
// over Ci+units channels with its own batchnorm; transposed conv 36*Ci*Co+Co
// with no batchnorm; 1x1 linear head Ci*Co+Co.
inline std::int64_t atom_params(const LayerAtom& atom, std::int64_t in_ch) {
  if (const auto* cv = std::get_if<ConvAtom>(&atom))
    return 9 * in_ch * cv->features + cv->features + 2 * cv->features;
  if (const auto* rc = std::get_if<RcAtom>(&atom)) {
    const std::int64_t H = rc->units / 2;
    const std::int64_t gru = 3 * (in_ch * H + H * H + H);
    const std::int64_t conv_in = in_ch + rc->units;
    return 2 * gru + 2 * rc->units + 9 * conv_in * rc->features + rc->features +
           2 * rc->features;
  }
  if (const auto* tc = std::get_if<TconvAtom>(&atom)) return 36 * in_ch * tc->features + tc->features;
  return 0;  // pooling
}

inline std::int64_t atom_out_ch(const LayerAtom& atom, std::int64_t in_ch) {
  if (const auto* cv = std::get_if<ConvAtom>(&atom)) return cv->features;
  if (const auto* rc = std::get_if<RcAtom>(&atom)) return rc->features;
  if (const auto* tc = std::get_if<TconvAtom>(&atom)) return tc->features;
  return in_ch;
}

struct ArchReport {
  struct BlockRow {
    std::string tokens;
    std::int64_t in_ch = 0, out_ch = 0;
    std::int64_t scale_in = 1, scale_out = 1;
    std::int64_t skip_from = 0;
    std::int64_t params = 0;
  };
  std::vector<BlockRow> blocks;
  std::int64_t head_params = 0;
  std::int64_t total_params = 0;
  ReceptiveField rf;
};

inline ArchReport analyze(const ArchSpec& spec) {
  const auto wires = wiring(spec);
  ArchReport report;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    ArchReport::BlockRow row;
    row.tokens = block_tokens(spec.blocks[i]);
    row.in_ch = wires[i].in_ch;
    row.out_ch = wires[i].out_ch;
    row.scale_in = wires[i].scale_in;
    row.scale_out = wires[i].scale_out;
    row.skip_from = wires[i].skip_from;
    std::int64_t c = wires[i].in_ch;
    for (const auto& atom : spec.blocks[i].atoms) {
      row.params += atom_params(atom, c);
      c = atom_out_ch(atom, c);
    }
    report.total_params += row.params;
    report.blocks.push_back(row);
  }
  report.head_params = wires.back().out_ch * spec.out_channels() + spec.out_channels();
  report.total_params += report.head_params;
  report.rf = receptive_field(spec);
  return report;
}

inline std::int64_t count_params(const ArchSpec& spec) { return analyze(spec).total_params; }

}  // namespace rcunet
