#pragma once

// Synthetic tagged corpora for tests. Everything is seeded and written as
// ordinary `<year>.txt` files so the real ingest path is exercised.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "td") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TaggedWord {
  std::string surface;
  std::string pos;
  std::string text() const { return surface + "/" + pos; }
};

using Line = std::vector<TaggedWord>;

inline std::string render(const std::vector<Line>& lines) {
  std::string out;
  for (const auto& line : lines) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out += ' ';
      out += line[i].text();
    }
    out += '\n';
  }
  return out;
}

inline void write_year(const fs::path& dir, int year, const std::vector<Line>& lines) {
  write_file(dir / (std::to_string(year) + ".txt"), render(lines));
}

inline const std::vector<std::string>& pos_tags() {
  static const std::vector<std::string> tags = {"n", "v", "a", "d", "m", "q", "u", "p", "t", "nr"};
  return tags;
}

// Random small corpus over `vocab` ASCII words with random tags; each word
// keeps one tag most of the time.
inline std::vector<Line> random_lines(std::mt19937_64& rng, std::size_t vocab, std::size_t lines,
                                      std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> tag(0, pos_tags().size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> home(vocab);
  for (auto& h : home) h = pos_tags()[tag(rng)];
  std::vector<Line> out(lines);
  for (auto& line : out) {
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t w = word(rng);
      line.push_back({"w" + std::to_string(w), unit(rng) < 0.9 ? home[w] : pos_tags()[tag(rng)]});
    }
  }
  return out;
}

// CJK-looking surface forms built from a fixed block of ideographs.
inline std::string cjk_word(std::size_t index) {
  auto utf8 = [](char32_t c) {
    std::string s;
    s += static_cast<char>(0xE0 | (c >> 12));
    s += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (c & 0x3F));
    return s;
  };
  std::string out;
  std::size_t x = index;
  do {
    out += utf8(static_cast<char32_t>(0x4E00 + (x % 2000)));
    x /= 2000;
  } while (x > 0);
  out += utf8(static_cast<char32_t>(0x5000 + (index % 97)));
  return out;
}

// Three disjoint planted vocabularies; each document is generated from a
// Dirichlet(0.1) mixture over the planted topics.
struct PlantedTopics {
  std::vector<std::vector<std::string>> vocab;  // per planted topic
  std::map<std::string, int> owner;
  std::vector<Line> lines;
  std::vector<int> dominant;  // per document
};

inline PlantedTopics planted_topics(std::uint64_t seed, std::size_t docs = 300, std::size_t topics = 3,
                                    std::size_t words_per_topic = 30, std::size_t doc_len = 60,
                                    double concentration = 0.1) {
  std::mt19937_64 rng(seed);
  PlantedTopics p;
  p.vocab.resize(topics);
  for (std::size_t t = 0; t < topics; ++t)
    for (std::size_t w = 0; w < words_per_topic; ++w) {
      std::string s = "t" + std::to_string(t) + "w" + std::to_string(w);
      p.owner[s] = static_cast<int>(t);
      p.vocab[t].push_back(s);
    }
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Zipf-ish weights inside each topic.
  std::vector<double> cdf(words_per_topic);
  double acc = 0;
  for (std::size_t w = 0; w < words_per_topic; ++w) cdf[w] = (acc += 1.0 / (1.0 + 0.3 * w));
  for (auto& c : cdf) c /= acc;
  for (std::size_t d = 0; d < docs; ++d) {
    std::vector<double> theta(topics);
    double sum = 0;
    for (auto& x : theta) sum += (x = gamma(rng));
    if (sum == 0.0) {  // every draw underflowed
      theta[std::uniform_int_distribution<std::size_t>(0, topics - 1)(rng)] = 1.0;
      sum = 1.0;
    }
    for (auto& x : theta) x /= sum;
    p.dominant.push_back(static_cast<int>(std::max_element(theta.begin(), theta.end()) - theta.begin()));
    Line line;
    for (std::size_t i = 0; i < doc_len; ++i) {
      double u = unit(rng), c = 0;
      std::size_t t = 0;
      for (; t + 1 < topics; ++t)
        if (u < (c += theta[t])) break;
      const double v = unit(rng);
      const std::size_t w = std::lower_bound(cdf.begin(), cdf.end(), v) - cdf.begin();
      line.push_back({p.vocab[t][std::min(w, words_per_topic - 1)], "n"});
    }
    p.lines.push_back(std::move(line));
  }
  return p;
}

// Filler lines that never contain any of `reserved`; exactly the lines in
// `planted_at` receive one reserved word at a random position.
inline std::vector<Line> planted_lines(std::uint64_t seed, std::size_t lines,
                                       const std::vector<std::string>& reserved,
                                       const std::set<std::size_t>& planted_at, std::size_t filler_vocab = 400) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, filler_vocab - 1);
  std::uniform_int_distribution<std::size_t> len(3, 25);
  std::uniform_int_distribution<std::size_t> pick(0, reserved.size() - 1);
  std::vector<Line> out(lines);
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) out[l].push_back({cjk_word(word(rng) + 5000), pos_tags()[i % 4]});
    if (planted_at.count(l)) {
      std::uniform_int_distribution<std::size_t> at(0, n);
      out[l].insert(out[l].begin() + static_cast<std::ptrdiff_t>(at(rng)), {reserved[pick(rng)], "nr"});
    }
  }
  return out;
}

inline std::set<std::size_t> choose(std::uint64_t seed, std::size_t n, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count)};
}

// Large corpus: topical Zipf vocabulary with a planted central word in about
// `central_rate` of lines, written over several year files until `bytes` is
// reached.
inline std::uint64_t write_large_corpus(const fs::path& dir, std::uint64_t bytes, const std::string& central,
                                        double central_rate = 0.2, std::uint64_t seed = 7,
                                        int first_year = 1957, int years = 5) {
  std::mt19937_64 rng(seed);
  constexpr std::size_t kTopics = 12;
  constexpr std::size_t kWordsPerTopic = 600;
  constexpr std::size_t kShared = 300;  // function-like words shared by all topics
  std::vector<double> cdf(kWordsPerTopic);
  double acc = 0;
  for (std::size_t w = 0; w < kWordsPerTopic; ++w) cdf[w] = (acc += 1.0 / std::pow(1.0 + w, 1.05));
  for (auto& c : cdf) c /= acc;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> topic(0, kTopics - 1);
  std::uniform_int_distribution<std::size_t> shared(0, kShared - 1);
  std::uniform_int_distribution<std::size_t> len(15, 45);
  const auto& tags = pos_tags();

  std::uint64_t written = 0;
  const std::uint64_t per_year = bytes / static_cast<std::uint64_t>(years) + 1;
  for (int y = 0; y < years; ++y) {
    std::string text;
    while (text.size() < per_year) {
      const std::size_t t1 = topic(rng), t2 = topic(rng);
      const std::size_t n = len(rng);
      const bool plant = unit(rng) < central_rate;
      std::size_t plant_at = plant ? static_cast<std::size_t>(unit(rng) * n) : n + 1;
      std::string line;
      for (std::size_t i = 0; i < n; ++i) {
        if (!line.empty()) line += ' ';
        if (i == plant_at) {
          line += central + "/nr ";
        }
        std::size_t id;
        if (unit(rng) < 0.3) {
          id = shared(rng);
        } else {
          const std::size_t t = unit(rng) < 0.7 ? t1 : t2;
          const std::size_t w = std::lower_bound(cdf.begin(), cdf.end(), unit(rng)) - cdf.begin();
          id = kShared + t * kWordsPerTopic + std::min(w, kWordsPerTopic - 1);
        }
        line += cjk_word(id);
        line += '/';
        line += tags[id % 4];
      }
      text += line;
      text += '\n';
    }
    write_file(dir / (std::to_string(first_year + y) + ".txt"), text);
    written += text.size();
  }
  return written;
}

}  // namespace fixtures
