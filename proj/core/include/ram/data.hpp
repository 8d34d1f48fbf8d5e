#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ram/tensor.hpp"

namespace ram {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kMaskId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kReservedCount = 4;

/// Token <-> id bijection with PAD/MASK/CLS/UNK pinned to ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t add(const std::string& token);
  /// Unknown tokens map to UNK.
  std::size_t id_of(const std::string& token) const;
  const std::string& token_of(std::size_t id) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

/// Answer string <-> class id, ordered by first occurrence. Each class also
/// records the vocabulary id of its answer token (the tied classifier row).
class AnswerInventory {
 public:
  std::size_t add(const std::string& answer, std::size_t token_id);
  std::size_t class_of(const std::string& answer) const;
  bool contains(const std::string& answer) const { return classes_.count(answer) != 0; }
  const std::string& answer_of(std::size_t cls) const { return answers_.at(cls); }
  std::size_t size() const noexcept { return answers_.size(); }
  const std::vector<std::string>& answers() const noexcept { return answers_; }
  const std::vector<std::size_t>& token_ids() const noexcept { return token_ids_; }

 private:
  std::vector<std::string> answers_;
  std::vector<std::size_t> token_ids_;
  std::map<std::string, std::size_t> classes_;
};

struct TextQuestion {
  std::vector<std::string> tokens;
  std::string answer;
  /// 1-based indices into the story's segments.
  std::vector<std::size_t> support;
  /// Number of segments streamed before the question was asked.
  std::size_t position = 0;

  bool operator==(const TextQuestion&) const = default;
};

struct TextStory {
  std::vector<std::vector<std::string>> segments;
  std::vector<TextQuestion> questions;

  bool operator==(const TextStory&) const = default;
};

struct Question {
  std::vector<std::size_t> ids;
  std::size_t answer = 0;
  std::vector<std::size_t> support;
  std::size_t position = 0;
};

struct Story {
  std::vector<std::vector<std::size_t>> segments;
  std::vector<Question> questions;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Lowercases and splits on whitespace; trailing . ? ! , become their own tokens.
std::vector<std::string> tokenize(std::string_view text);

std::vector<TextStory> parse_babi(std::istream& in);
std::vector<TextStory> parse_babi(std::string_view text);
std::vector<TextStory> read_babi_file(const std::filesystem::path& path);

/// Inverse of parse_babi up to whitespace and case; line ids are renumbered
/// consecutively from 1 inside every story.
std::string serialize_babi(const std::vector<TextStory>& stories);
void write_babi_file(const std::filesystem::path& path, const std::vector<TextStory>& stories);

struct Lexicon {
  Vocabulary vocab;
  AnswerInventory answers;
};

/// Every training token and every answer string enters the vocabulary.
Lexicon build_vocab(const std::vector<TextStory>& stories);

/// Maps a text story to ids. Segments longer than `max_tokens` or answers not
/// in the inventory are contract errors.
Story encode_story(const TextStory& story, const Lexicon& lexicon, std::size_t max_tokens);
std::vector<Story> encode_stories(const std::vector<TextStory>& stories, const Lexicon& lexicon,
                                  std::size_t max_tokens);

/// "Single supporting fact" stories: people move between rooms, questions ask
/// where someone is. Layout mirrors the bAbI task: two statements then a question.
std::vector<TextStory> generate_task1(std::size_t count, std::uint64_t seed, std::size_t questions_per_story = 5);

/// "Two supporting facts" stories: people move and carry objects; questions ask
/// where an object is.
std::vector<TextStory> generate_task2(std::size_t count, std::uint64_t seed, std::size_t questions_per_story = 5);

struct TaskFiles {
  std::filesystem::path train;
  std::filesystem::path test;
};

/// Locates qa<task>_*_train.txt / _test.txt under `dir` (also looking into en-10k/).
TaskFiles find_task_files(const std::filesystem::path& dir, int task);

}  // namespace ram
