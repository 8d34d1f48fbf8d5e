#include "ram/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "ram/tensor.hpp"

namespace ram {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<mask>", "<cls>", "<unk>"}) add(t);
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  ids_[token] = tokens_.size();
  tokens_.push_back(token);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
  if (id >= tokens_.size()) throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  if (tokens.size() < kReservedCount) throw ContractError("vocabulary must contain the reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != v.tokens_[i]) throw ContractError("reserved token mismatch at id " + std::to_string(i));
  }
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) throw ContractError("duplicate token in vocabulary: " + tokens[i]);
  }
  return v;
}

std::size_t AnswerInventory::add(const std::string& answer, std::size_t token_id) {
  if (auto it = classes_.find(answer); it != classes_.end()) return it->second;
  classes_[answer] = answers_.size();
  answers_.push_back(answer);
  token_ids_.push_back(token_id);
  return answers_.size() - 1;
}

std::size_t AnswerInventory::class_of(const std::string& answer) const {
  auto it = classes_.find(answer);
  if (it == classes_.end()) throw ContractError("answer '" + answer + "' is not in the answer inventory");
  return it->second;
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_split_punct(char c) { return c == '.' || c == '?' || c == '!' || c == ','; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    std::vector<std::string> tail;
    while (word.size() > 1 && is_split_punct(word.back())) {
      tail.emplace_back(1, word.back());
      word.pop_back();
    }
    tokens.push_back(lower(word));
    tokens.insert(tokens.end(), tail.rbegin(), tail.rend());
  }
  return tokens;
}

std::vector<TextStory> parse_babi(std::istream& in) {
  std::vector<TextStory> stories;
  std::map<std::size_t, std::size_t> segment_of_line;  // line id -> 1-based segment index
  long prev_id = 0;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty()) continue;

    std::size_t digits = 0;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits == 0) throw ParseError(lineno, "expected a leading line id");
    if (digits == line.size() || !std::isspace(static_cast<unsigned char>(line[digits]))) {
      throw ParseError(lineno, "expected text after the line id");
    }
    const long id = std::stol(std::string(line.substr(0, digits)));
    std::string_view body = trim(line.substr(digits));

    if (id == 1) {
      stories.emplace_back();
      segment_of_line.clear();
    } else if (stories.empty() || id <= prev_id) {
      throw ParseError(lineno, "line id " + std::to_string(id) + " does not follow " + std::to_string(prev_id));
    }
    prev_id = id;
    TextStory& story = stories.back();

    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) {
      auto tokens = tokenize(body);
      if (tokens.empty()) throw ParseError(lineno, "empty statement");
      story.segments.push_back(std::move(tokens));
      segment_of_line[std::size_t(id)] = story.segments.size();
      continue;
    }

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto next = body.find('\t', start);
      fields.push_back(body.substr(start, next == std::string_view::npos ? next : next - start));
      if (next == std::string_view::npos) break;
      start = next + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) throw ParseError(lineno, "question lines need 2 or 3 tab fields");
    TextQuestion q;
    q.tokens = tokenize(fields[0]);
    q.answer = lower(trim(fields[1]));
    if (q.tokens.empty()) throw ParseError(lineno, "empty question");
    if (q.answer.empty()) throw ParseError(lineno, "empty answer");
    if (story.segments.empty()) throw ParseError(lineno, "question before any statement");
    if (fields.size() == 3) {
      std::istringstream ids{std::string(fields[2])};
      std::string tok;
      while (ids >> tok) {
        std::size_t ref = 0;
        try {
          ref = std::stoul(tok);
        } catch (const std::exception&) {
          throw ParseError(lineno, "bad supporting id '" + tok + "'");
        }
        auto it = segment_of_line.find(ref);
        if (it == segment_of_line.end()) {
          throw ParseError(lineno, "supporting id " + tok + " is not an earlier statement");
        }
        q.support.push_back(it->second);
      }
    }
    q.position = story.segments.size();
    story.questions.push_back(std::move(q));
  }
  return stories;
}

std::vector<TextStory> parse_babi(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_babi(in);
}

std::vector<TextStory> read_babi_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_babi(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

namespace {

void join(std::ostream& out, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) out << (i ? " " : "") << tokens[i];
}

}  // namespace

std::string serialize_babi(const std::vector<TextStory>& stories) {
  std::ostringstream out;
  for (const auto& story : stories) {
    std::size_t line = 0;
    std::vector<std::size_t> line_of_segment(story.segments.size() + 1, 0);
    std::size_t next_question = 0;
    auto emit_questions = [&](std::size_t position) {
      while (next_question < story.questions.size() && story.questions[next_question].position == position) {
        const auto& q = story.questions[next_question++];
        out << ++line << ' ';
        join(out, q.tokens);
        out << '\t' << q.answer << '\t';
        for (std::size_t i = 0; i < q.support.size(); ++i) {
          out << (i ? " " : "") << line_of_segment.at(q.support[i]);
        }
        out << '\n';
      }
    };
    for (std::size_t s = 0; s < story.segments.size(); ++s) {
      out << ++line << ' ';
      join(out, story.segments[s]);
      out << '\n';
      line_of_segment[s + 1] = line;
      emit_questions(s + 1);
    }
  }
  return out.str();
}

void write_babi_file(const std::filesystem::path& path, const std::vector<TextStory>& stories) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_babi(stories);
}

Lexicon build_vocab(const std::vector<TextStory>& stories) {
  Lexicon lex;
  for (const auto& story : stories) {
    for (const auto& seg : story.segments) {
      for (const auto& tok : seg) lex.vocab.add(tok);
    }
    for (const auto& q : story.questions) {
      for (const auto& tok : q.tokens) lex.vocab.add(tok);
    }
  }
  for (const auto& story : stories) {
    for (const auto& q : story.questions) lex.answers.add(q.answer, lex.vocab.add(q.answer));
  }
  return lex;
}

Story encode_story(const TextStory& story, const Lexicon& lexicon, std::size_t max_tokens) {
  Story out;
  for (const auto& seg : story.segments) {
    if (seg.empty() || seg.size() > max_tokens) {
      throw ContractError("segment of " + std::to_string(seg.size()) + " tokens outside [1, " +
                          std::to_string(max_tokens) + "]");
    }
    std::vector<std::size_t> ids;
    for (const auto& tok : seg) ids.push_back(lexicon.vocab.id_of(tok));
    out.segments.push_back(std::move(ids));
  }
  for (const auto& q : story.questions) {
    if (q.tokens.empty() || q.tokens.size() > max_tokens) {
      throw ContractError("question of " + std::to_string(q.tokens.size()) + " tokens outside [1, " +
                          std::to_string(max_tokens) + "]");
    }
    if (q.position == 0 || q.position > story.segments.size()) {
      throw ContractError("question position " + std::to_string(q.position) + " outside the story");
    }
    Question eq;
    for (const auto& tok : q.tokens) eq.ids.push_back(lexicon.vocab.id_of(tok));
    eq.answer = lexicon.answers.class_of(q.answer);
    eq.support = q.support;
    eq.position = q.position;
    out.questions.push_back(std::move(eq));
  }
  return out;
}

std::vector<Story> encode_stories(const std::vector<TextStory>& stories, const Lexicon& lexicon,
                                  std::size_t max_tokens) {
  std::vector<Story> out;
  out.reserve(stories.size());
  for (const auto& s : stories) out.push_back(encode_story(s, lexicon, max_tokens));
  return out;
}

namespace {

const std::vector<std::string> kPeople = {"mary", "john", "daniel", "sandra"};
const std::vector<std::string> kPlaces = {"bathroom", "hallway", "garden", "office", "kitchen", "bedroom"};
const std::vector<std::vector<std::string>> kMoves = {
    {"moved", "to"}, {"went", "to"}, {"journeyed", "to"}, {"travelled", "to"}, {"went", "back", "to"}};
const std::vector<std::string> kObjects = {"football", "apple", "milk"};
const std::vector<std::vector<std::string>> kGets = {{"picked", "up"}, {"got"}, {"grabbed"}, {"took"}};
const std::vector<std::vector<std::string>> kDrops = {{"dropped"}, {"discarded"}, {"put", "down"}, {"left"}};

template <typename C>
const auto& pick(const C& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::vector<std::string> move_sentence(const std::string& who, const std::vector<std::string>& verb,
                                       const std::string& where) {
  std::vector<std::string> s = {who};
  s.insert(s.end(), verb.begin(), verb.end());
  s.insert(s.end(), {"the", where, "."});
  return s;
}

}  // namespace

std::vector<TextStory> generate_task1(std::size_t count, std::uint64_t seed, std::size_t questions_per_story) {
  if (count == 0) throw ContractError("generate_task1 needs count >= 1");
  std::mt19937_64 rng(seed);
  std::vector<TextStory> stories;
  for (std::size_t n = 0; n < count; ++n) {
    TextStory story;
    std::map<std::string, std::pair<std::string, std::size_t>> where;  // person -> (place, segment)
    for (std::size_t q = 0; q < questions_per_story; ++q) {
      for (int k = 0; k < 2; ++k) {
        const auto& who = pick(kPeople, rng);
        const auto& place = pick(kPlaces, rng);
        story.segments.push_back(move_sentence(who, pick(kMoves, rng), place));
        where[who] = {place, story.segments.size()};
      }
      // Ask about one of the two people just mentioned, as the original task does.
      const auto& recent = story.segments[story.segments.size() - 1 - std::uniform_int_distribution<int>(0, 1)(rng)];
      const std::string& who = recent.front();
      TextQuestion tq;
      tq.tokens = {"where", "is", who, "?"};
      tq.answer = where[who].first;
      tq.support = {where[who].second};
      tq.position = story.segments.size();
      story.questions.push_back(std::move(tq));
    }
    stories.push_back(std::move(story));
  }
  return stories;
}

std::vector<TextStory> generate_task2(std::size_t count, std::uint64_t seed, std::size_t questions_per_story) {
  if (count == 0) throw ContractError("generate_task2 needs count >= 1");
  std::mt19937_64 rng(seed);
  std::vector<TextStory> stories;
  while (stories.size() < count) {
    TextStory story;
    std::map<std::string, std::pair<std::string, std::size_t>> person_at;  // person -> (place, segment)
    struct ObjectState {
      std::string holder;
      std::string place;
      std::size_t fact = 0;  // segment that last changed the object
    };
    std::map<std::string, ObjectState> objects;

    auto locate = [&](const std::string& obj, std::vector<std::size_t>& support) -> std::string {
      const auto it = objects.find(obj);
      if (it == objects.end()) return {};
      const auto& st = it->second;
      if (!st.holder.empty()) {
        const auto& p = person_at.at(st.holder);
        support = {st.fact, p.second};
        if (st.fact > p.second) std::swap(support[0], support[1]);
        return p.first;
      }
      support = {st.fact};
      return st.place;
    };

    for (std::size_t q = 0; q < questions_per_story; ++q) {
      const int statements = std::uniform_int_distribution<int>(2, 4)(rng);
      for (int k = 0; k < statements; ++k) {
        const auto& who = pick(kPeople, rng);
        const double roll = std::uniform_real_distribution<double>(0, 1)(rng);
        std::vector<std::string> held, free;
        for (const auto& o : kObjects) {
          auto it = objects.find(o);
          if (it != objects.end() && it->second.holder == who) held.push_back(o);
          if (it == objects.end() || it->second.holder.empty()) {
            if (it == objects.end() || (person_at.count(who) && it->second.place == person_at[who].first)) {
              free.push_back(o);
            }
          }
        }
        const bool located = person_at.count(who) != 0;
        if (located && roll < 0.3 && !free.empty()) {
          const auto& obj = pick(free, rng);
          std::vector<std::string> s = {who};
          const auto& verb = pick(kGets, rng);
          s.insert(s.end(), verb.begin(), verb.end());
          s.insert(s.end(), {"the", obj, "there", "."});
          story.segments.push_back(std::move(s));
          objects[obj] = {who, "", story.segments.size()};
        } else if (located && roll < 0.5 && !held.empty()) {
          const auto& obj = pick(held, rng);
          std::vector<std::string> s = {who};
          const auto& verb = pick(kDrops, rng);
          s.insert(s.end(), verb.begin(), verb.end());
          s.insert(s.end(), {"the", obj, "."});
          story.segments.push_back(std::move(s));
          objects[obj] = {"", person_at[who].first, story.segments.size()};
        } else {
          const auto& place = pick(kPlaces, rng);
          story.segments.push_back(move_sentence(who, pick(kMoves, rng), place));
          person_at[who] = {place, story.segments.size()};
        }
      }
      std::vector<std::string> known;
      for (const auto& o : kObjects) {
        std::vector<std::size_t> support;
        if (!locate(o, support).empty()) known.push_back(o);
      }
      if (known.empty()) continue;
      const auto& obj = pick(known, rng);
      TextQuestion tq;
      tq.tokens = {"where", "is", "the", obj, "?"};
      tq.answer = locate(obj, tq.support);
      tq.position = story.segments.size();
      story.questions.push_back(std::move(tq));
    }
    if (story.questions.empty()) continue;
    stories.push_back(std::move(story));
  }
  return stories;
}

TaskFiles find_task_files(const std::filesystem::path& dir, int task) {
  namespace fs = std::filesystem;
  const std::string prefix = "qa" + std::to_string(task) + "_";
  for (const auto& base : {dir, dir / "en-10k", dir / "tasks_1-20_v1-2" / "en-10k"}) {
    if (!fs::is_directory(base)) continue;
    TaskFiles files;
    for (const auto& entry : fs::directory_iterator(base)) {
      const auto name = entry.path().filename().string();
      if (name.rfind(prefix, 0) != 0) continue;
      if (name.ends_with("_train.txt")) files.train = entry.path();
      if (name.ends_with("_test.txt")) files.test = entry.path();
    }
    if (!files.train.empty() && !files.test.empty()) return files;
  }
  throw std::runtime_error("no qa" + std::to_string(task) + "_*_train.txt/_test.txt under " + dir.string());
}

}  // namespace ram
