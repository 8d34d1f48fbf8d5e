#include "ram/masking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ram/tensor.hpp"

namespace ram {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

PosTag parse_pos_tag(std::string_view name) {
  const auto n = lower(name);
  if (n == "noun") return PosTag::Noun;
  if (n == "pronoun") return PosTag::Pronoun;
  if (n == "verb") return PosTag::Verb;
  if (n == "other") return PosTag::Other;
  throw LexiconError("unknown tag '" + std::string(name) + "'");
}

std::string_view pos_tag_name(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Pronoun: return "PRONOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

void PosLexicon::set(const std::string& token, PosTag tag) { tags_[lower(token)] = tag; }

PosTag PosLexicon::tag(std::string_view token) const {
  auto it = tags_.find(lower(token));
  return it == tags_.end() ? PosTag::Other : it->second;
}

std::vector<bool> PosLexicon::candidate_flags(const Vocabulary& vocab) const {
  std::vector<bool> flags(vocab.size(), false);
  for (std::size_t id = kReservedCount; id < vocab.size(); ++id) flags[id] = is_candidate(tag(vocab.token_of(id)));
  return flags;
}

PosLexicon parse_lexicon(std::istream& in) {
  PosLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw LexiconError("line " + std::to_string(lineno) + ": expected token<TAB>tag");
    try {
      lex.set(line.substr(0, tab), parse_pos_tag(line.substr(tab + 1)));
    } catch (const LexiconError& e) {
      throw LexiconError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return lex;
}

PosLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open lexicon " + path.string());
  try {
    return parse_lexicon(in);
  } catch (const LexiconError& e) {
    throw LexiconError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::size_t> sample_subset(std::vector<std::size_t> candidates, std::size_t segment_len, double ratio,
                                       Rng& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ContractError("mask ratio must lie in (0, 1]");
  if (candidates.empty()) return {};
  const auto cap = std::max<std::size_t>(1, std::size_t(std::floor(ratio * double(segment_len))));
  const std::size_t take = std::min(cap, candidates.size());
  // Partial Fisher-Yates: the first `take` entries become a uniform subset.
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, candidates.size() - 1)(rng);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::vector<std::size_t> select_mask_positions(std::span<const std::size_t> segment,
                                               const std::vector<bool>& candidate_by_id, double ratio, Rng& rng,
                                               MaskMode mode) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const bool ok = mode == MaskMode::Random || (segment[i] < candidate_by_id.size() && candidate_by_id[segment[i]]);
    if (ok) candidates.push_back(i);
  }
  return sample_subset(std::move(candidates), segment.size(), ratio, rng);
}

std::vector<std::size_t> select_mask_positions(std::span<const std::string> segment, const PosLexicon& lexicon,
                                               double ratio, Rng& rng, MaskMode mode) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (mode == MaskMode::Random || PosLexicon::is_candidate(lexicon.tag(segment[i]))) candidates.push_back(i);
  }
  return sample_subset(std::move(candidates), segment.size(), ratio, rng);
}

MaskedSample apply_mask(std::span<const std::size_t> segment, std::span<const std::size_t> positions,
                        Direction direction) {
  MaskedSample sample;
  sample.direction = direction;
  sample.ids.reserve(segment.size() + 1);
  sample.ids.push_back(kClsId);
  sample.ids.insert(sample.ids.end(), segment.begin(), segment.end());
  for (auto p : positions) {
    if (p >= segment.size()) {
      throw ContractError("mask position " + std::to_string(p) + " outside segment of " +
                          std::to_string(segment.size()) + " tokens");
    }
    if (sample.ids[p + 1] == kMaskId) continue;
    sample.target_positions.push_back(p + 1);
    sample.target_ids.push_back(segment[p]);
    sample.ids[p + 1] = kMaskId;
  }
  return sample;
}

}  // namespace ram
