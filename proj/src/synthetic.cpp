#include "hiergen/synthetic.hpp"

#include <algorithm>
#include <array>
#include <string_view>
#include <vector>

#include "hiergen/random.hpp"

namespace hiergen {

namespace {

constexpr std::array<std::string_view, 48> kTopics = {
    "harbor",  "castle",  "river",   "forest",  "bridge",  "temple",  "mill",    "market",
    "tower",   "garden",  "mine",    "canal",   "abbey",   "fort",    "quarry",  "orchard",
    "library", "railway", "lighthouse", "vineyard", "monastery", "glacier", "meadow", "harbour",
    "foundry", "chapel",  "citadel", "estuary", "plateau", "lagoon",  "brewery", "observatory",
    "museum",  "stadium", "academy", "theatre", "granary", "aqueduct", "dockyard", "palace",
    "cathedral", "pasture", "reservoir", "shipyard", "bazaar", "fortress", "valley", "island"};

constexpr std::array<std::string_view, 32> kPlaces = {
    "Aldmere", "Brisk",   "Corvan",  "Dunmoor", "Elbury",  "Fenwick", "Galtor",  "Harwell",
    "Istow",   "Jarrow",  "Kelby",   "Lorn",    "Marsh",   "Norwin",  "Oakley",  "Pellam",
    "Quarne",  "Rusk",    "Selwyn",  "Tarrow",  "Ulver",   "Vance",   "Wexley",  "Yarrow",
    "Zenith",  "Ashby",   "Brant",   "Colby",   "Derwen",  "Eskdale", "Frome",   "Glenn"};

constexpr std::array<std::string_view, 12> kAdjectives = {
    "old", "large", "famous", "small", "northern", "southern", "ancient", "busy", "quiet", "royal", "eastern", "western"};

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

class Grammar {
 public:
  explicit Grammar(std::uint64_t seed) : rng_(seed) {}

  std::size_t range(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1)); }

  template <std::size_t N>
  std::string_view pick(const std::array<std::string_view, N>& pool) {
    return pool[static_cast<std::size_t>(rng_.below(N))];
  }

  std::string_view topic(std::size_t pool) { return kTopics[static_cast<std::size_t>(rng_.below(pool))]; }

  std::string year() { return std::to_string(1700 + rng_.below(320)); }

  // One sentence about topic words `t` and `u` of the place `s`.
  std::string sentence(std::string_view s, std::string_view t, std::string_view u, bool opening) {
    const std::string adj(pick(kAdjectives));
    if (opening)
      return capitalize(s) + " is a town .";
    // The first topic word always follows the opening article.
    switch (rng_.below(8)) {
      case 0:
        return "The " + std::string(t) + " was built in " + year() + " .";
      case 1:
        return "The " + std::string(t) + " stands beside the " + adj + " " + std::string(u) + " .";
      case 2:
        return "The " + std::string(t) + " and the " + std::string(u) + " were restored in " + year() + " .";
      case 3:
        return "The " + std::string(t) + " is often visited from the " + std::string(u) + " .";
      case 4:
        return "The " + std::string(t) + " was supplied by the " + std::string(u) + " for many years .";
      case 5:
        return "The " + std::string(t) + " is described as the most " + adj + " " + std::string(u) + " .";
      case 6:
        return "The " + std::string(t) + " gained a " + adj + " " + std::string(u) + " in " + year() + " .";
      default:
        return "The " + std::string(t) + " remains the " + adj + " heart of the " + std::string(u) + " .";
    }
  }

 private:
  Rng rng_;
};

}  // namespace

std::string generate_synthetic_corpus(const SyntheticOptions& options) {
  Grammar g(options.seed);
  const std::size_t pool = std::clamp<std::size_t>(options.topics, 2, kTopics.size());
  const std::size_t per_article = std::clamp<std::size_t>(options.article_topics, 2, pool);
  std::string out;
  for (std::size_t a = 0; a < options.articles; ++a) {
    const std::string place(g.pick(kPlaces));
    const std::string suffix = std::to_string(a);
    out += " = " + place + " " + capitalize(g.pick(kTopics)) + " " + suffix + " = \n \n";
    std::vector<std::string_view> topics;
    while (topics.size() < per_article) {
      const auto t = g.topic(pool);
      if (std::find(topics.begin(), topics.end(), t) == topics.end()) topics.push_back(t);
    }
    const std::size_t paragraphs = g.range(options.min_paragraphs, options.max_paragraphs);
    for (std::size_t p = 0; p < paragraphs; ++p) {
      std::string_view t = topics[0], u = topics[1];
      if (p > 0) {
        t = topics[g.range(0, per_article - 1)];
        do u = topics[g.range(0, per_article - 1)];
        while (u == t);
      }
      if (p > 0 && g.range(0, 3) == 0) out += " = = " + capitalize(t) + " = = \n \n";
      if (p > 0 && g.range(0, 9) == 0) out += " | " + std::string(t) + " | " + g.year() + " | \n";
      const std::size_t sentences = g.range(options.min_sentences, options.max_sentences);
      std::string line;
      for (std::size_t s = 0; s < sentences; ++s) {
        if (s) line += ' ';
        line += g.sentence(place, t, u, p == 0 && s == 0);
      }
      out += " " + line + " \n \n";
    }
  }
  return out;
}

}  // namespace hiergen
