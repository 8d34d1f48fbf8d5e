#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ram/data.hpp"

namespace ram {

enum class PosTag { Noun, Pronoun, Verb, Other };

PosTag parse_pos_tag(std::string_view name);
std::string_view pos_tag_name(PosTag tag);

class LexiconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Case-insensitive token -> part-of-speech map; unknown tokens are Other.
class PosLexicon {
 public:
  void set(const std::string& token, PosTag tag);
  PosTag tag(std::string_view token) const;
  std::size_t size() const noexcept { return tags_.size(); }

  /// Whether the tag marks a coreference-related token (noun, pronoun or verb).
  static bool is_candidate(PosTag tag) { return tag != PosTag::Other; }

  /// Per-vocabulary-id candidate flags, for masking id sequences.
  std::vector<bool> candidate_flags(const Vocabulary& vocab) const;

 private:
  std::map<std::string, PosTag, std::less<>> tags_;
};

/// Lines of `token<TAB>tag`; blank lines and lines starting with '#' are skipped.
PosLexicon parse_lexicon(std::istream& in);
PosLexicon load_lexicon(const std::filesystem::path& path);

enum class MaskMode { Coref, Random };
enum class Direction { Past = 0, Future = 1 };

using Rng = std::mt19937_64;

/// Picks a uniform random subset of maskable positions. Coref mode draws only
/// from candidate positions, Random mode from all. The subset size is
/// min(candidates, max(1, floor(ratio * N))), or zero without candidates.
std::vector<std::size_t> select_mask_positions(std::span<const std::size_t> segment,
                                               const std::vector<bool>& candidate_by_id, double ratio, Rng& rng,
                                               MaskMode mode);

std::vector<std::size_t> select_mask_positions(std::span<const std::string> segment, const PosLexicon& lexicon,
                                               double ratio, Rng& rng, MaskMode mode);

/// Masked model input. `ids` starts with CLS, so target positions are the
/// segment positions shifted by one.
struct MaskedSample {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> target_positions;
  std::vector<std::size_t> target_ids;
  Direction direction = Direction::Past;
};

MaskedSample apply_mask(std::span<const std::size_t> segment, std::span<const std::size_t> positions,
                        Direction direction = Direction::Past);

}  // namespace ram
