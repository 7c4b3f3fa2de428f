#pragma once

#include <string>
#include <vector>

#include "gramufen/data/manifest.hpp"

namespace testing_support {

/// Raw tweet-like strings for clean_text properties.
inline const std::vector<std::string>& cleaning_corpus() {
  static const std::vector<std::string> c{
      "RT @a: Hello http://x.co world",
      "plain text",
      "@a @b",
      "rt @user: breaking news",
      "RT: something happened",
      "RT RT @x: nested retweet",
      "rT : Mixed case marker",
      "Check this https://t.co/abc123 out",
      "www.example.com is down",
      "Visit http://a.b/c?d=e&f=g now!!",
      "http://only.link",
      "   lots    of   spaces   ",
      "\tTabs\tand\nnewlines\n",
      "UPPER CASE SHOUTING",
      "email me at someone@example.com",
      "@lead mention then text",
      "text then @trailing",
      "mid@mention token",
      "RT",
      "rt",
      "",
      "   ",
      ":",
      "RT @a: RT @b: double retweet",
      "art is not a retweet",
      "start RT in the middle",
      "#hashtag stays #Sandy",
      "numbers 123 and 4.56",
      "emoji \xF0\x9F\x98\x80 kept",
      "unicode caf\xC3\xA9 na\xC3\xAFve",
      "punctuation, stays; here.",
      "http://x.co",
      "https://x.co/RT",
      "textwithhttp://embedded.link",
      "@",
      "@@double",
      "RT @a:",
      "RT@a: glued marker",
      ":http://x.co",
      "rt: rt: rt: stacked",
      "Hurricane Sandy photo http://t.co/xyz #sandy",
      "@CNN: Breaking http://cnn.it/1 RT",
      "WWW.SHOUT.COM link",
      "HTTP://UPPER.LINK tail",
      "a",
      "RT @user_name123: ok",
      "multiple\n\nblank\n\nlines",
      "trailing url http://x.co/",
      "rt@x",
      "quote \"RT @a: inner\" here",
  };
  return c;
}

/// Ten manifest rows; three become duplicates once retweet markers, mentions
/// and links are stripped, so seven survive clean + deduplicate.
inline std::vector<gramufen::Sample> dedup_corpus() {
  using gramufen::Label;
  const std::vector<std::pair<std::string, Label>> rows{
      {"Sandy hits the coast", Label::Fake},
      {"RT @news: Sandy hits the coast", Label::Fake},           // dup of 0
      {"Sandy hits the coast", Label::Real},                    // different label, kept
      {"Shark swims on the highway http://t.co/a", Label::Fake},
      {"shark swims on the highway", Label::Fake},              // dup of 3
      {"Official update from the mayor", Label::Real},
      {"rt @mayor: official update from the mayor http://x.co", Label::Real},  // dup of 5
      {"Statue of liberty under clouds", Label::Fake},
      {"Power outage in lower Manhattan", Label::Real},
      {"Flooded subway station photo", Label::Fake},
  };
  std::vector<gramufen::Sample> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    gramufen::Sample s;
    s.id = "d" + std::to_string(i);
    s.text = rows[i].first;
    s.image_refs = {"img" + std::to_string(i) + ".jpg"};
    s.label = rows[i].second;
    out.push_back(s);
  }
  return out;
}

inline std::vector<gramufen::Sample> numbered_samples(std::size_t n) {
  std::vector<gramufen::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    gramufen::Sample s;
    s.id = "n" + std::to_string(i);
    s.text = "sample number " + std::to_string(i);
    s.image_refs = {"i.png"};
    s.label = i % 2 ? gramufen::Label::Real : gramufen::Label::Fake;
    out.push_back(s);
  }
  return out;
}

}  // namespace testing_support
