#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vasim/error.hpp"
#include "vasim/random.hpp"

namespace vasim::keyword {

// Pronunciation table plus the activation phrase. `word_weights` drives the
// synthetic conversation model; words without a weight never occur.
struct Lexicon {
  std::map<std::string, std::vector<std::string>> entries;
  std::vector<std::string> keyword;
  std::map<std::string, double> word_weights;
};

// "ok google" with the syllable donors from the Fig. 2 style example
// (oh/cake for O-K, good/go for Goo-gle) and some filler vocabulary.
inline Lexicon default_lexicon() {
  Lexicon lex;
  lex.keyword = {"ok", "google"};
  lex.entries = {
      {"ok", {"o", "k"}},          {"google", {"goo", "gle"}}, {"oh", {"o"}},
      {"cake", {"k"}},             {"good", {"goo"}},          {"go", {"gle"}},
      {"hello", {"hel", "lo"}},    {"yes", {"yes"}},           {"no", {"no"}},
      {"the", {"the"}},            {"meeting", {"mee", "ting"}}, {"today", {"to", "day"}},
      {"later", {"la", "ter"}},    {"thanks", {"thanks"}},     {"search", {"search"}},
      {"engine", {"en", "gine"}},  {"call", {"call"}},         {"dinner", {"din", "ner"}},
      {"weekend", {"week", "end"}}, {"maybe", {"may", "be"}},
  };
  lex.word_weights = {
      {"ok", 0.6},      {"google", 0.25}, {"oh", 0.8},     {"cake", 0.15},  {"good", 0.8},
      {"go", 0.7},      {"hello", 0.5},   {"yes", 1.2},    {"no", 1.0},     {"the", 3.0},
      {"meeting", 0.4}, {"today", 0.8},   {"later", 0.6},  {"thanks", 0.7}, {"search", 0.2},
      {"engine", 0.15}, {"call", 0.5},    {"dinner", 0.4}, {"weekend", 0.4}, {"maybe", 0.7},
  };
  return lex;
}

inline void validate(const Lexicon& lex) {
  if (lex.keyword.empty()) throw ConfigError("lexicon: empty keyword");
  for (const auto& w : lex.keyword)
    if (!lex.entries.contains(w)) throw ConfigError("lexicon: keyword word '" + w + "' has no entry");
  for (const auto& [w, syl] : lex.entries)
    if (syl.empty()) throw ConfigError("lexicon: entry '" + w + "' has no syllables");
  for (const auto& [w, weight] : lex.word_weights) {
    if (!lex.entries.contains(w)) throw ConfigError("lexicon: weighted word '" + w + "' has no entry");
    if (!(weight >= 0.0)) throw ConfigError("lexicon: negative weight for '" + w + "'");
  }
}

inline const std::vector<std::string>& syllabify(const std::string& word, const Lexicon& lex) {
  auto it = lex.entries.find(word);
  if (it == lex.entries.end()) throw ConfigError("unknown word '" + word + "'");
  return it->second;
}

// A recognized word with its syllable annotation.
struct Token {
  std::string word;
  std::vector<std::string> syllables;
};

// One 20-second slice of call transcript.
struct Segment {
  std::uint64_t id = 0;
  std::vector<Token> tokens;
};

inline Segment annotate(std::uint64_t id, const std::vector<std::string>& words, const Lexicon& lex) {
  Segment seg{id, {}};
  for (const auto& w : words) seg.tokens.push_back({w, syllabify(w, lex)});
  return seg;
}

enum class CaptureMode : std::uint8_t { WordBased, SyllableBased };

struct CaptureState {
  CaptureMode mode = CaptureMode::WordBased;
  std::vector<std::string> needed;                 // keyword words or syllables, in order
  std::map<std::string, std::uint64_t> captured;   // unit -> source segment id
  bool complete = false;
};

inline CaptureState start_capture(CaptureMode mode, const Lexicon& lex) {
  CaptureState st;
  st.mode = mode;
  for (const auto& w : lex.keyword) {
    if (mode == CaptureMode::WordBased) {
      st.needed.push_back(w);
    } else {
      for (const auto& s : syllabify(w, lex)) st.needed.push_back(s);
    }
  }
  // Repeated units (e.g. a syllable occurring twice) only need one recording.
  std::vector<std::string> unique;
  for (const auto& u : st.needed)
    if (std::find(unique.begin(), unique.end(), u) == unique.end()) unique.push_back(u);
  st.needed = std::move(unique);
  return st;
}

// Records any still-missing unit the segment supplies. First capture wins;
// a complete state is frozen.
inline CaptureState feed_segment(CaptureState state, const Segment& segment) {
  if (state.complete) return state;
  std::set<std::string> missing;
  for (const auto& u : state.needed)
    if (!state.captured.contains(u)) missing.insert(u);
  for (const auto& tok : segment.tokens) {
    if (state.mode == CaptureMode::WordBased) {
      if (missing.erase(tok.word)) state.captured.emplace(tok.word, segment.id);
    } else {
      for (const auto& syl : tok.syllables)
        if (missing.erase(syl)) state.captured.emplace(syl, segment.id);
    }
  }
  state.complete = missing.empty();
  return state;
}

struct KeyConfig {
  double word_based_success = 1.0;
  double syllable_based_success = 0.4;
};

struct ActivationKey {
  std::vector<std::string> units;
  CaptureMode mode = CaptureMode::WordBased;
  double activation_success_prob = 1.0;
};

inline ActivationKey synthesize(const CaptureState& state, const KeyConfig& cfg = {}) {
  if (!state.complete) throw ConfigError("capture incomplete");
  ActivationKey key;
  key.units = state.needed;
  key.mode = state.mode;
  key.activation_success_prob = state.mode == CaptureMode::WordBased ? cfg.word_based_success
                                                                      : cfg.syllable_based_success;
  return key;
}

// One playback attempt of the synthesized key.
inline bool attempt_activation(const ActivationKey& key, Rng& rng) {
  return bernoulli(rng, key.activation_success_prob);
}

}  // namespace vasim::keyword
