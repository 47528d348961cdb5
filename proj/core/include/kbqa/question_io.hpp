#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kbqa/kb_store.hpp"

namespace kbqa {

/// One line of a questions file: subject, predicate, object, text. The id is
/// the 1-based line number.
struct QuestionRecord {
  std::string id;
  std::string subject;
  std::string predicate;
  std::string object;
  std::string text;
};

/// Malformed lines are reported through `errors` (when given) and skipped.
std::vector<QuestionRecord> read_questions(std::istream& in,
                                           std::vector<IngestError>* errors = nullptr,
                                           std::string_view source = "questions");

void write_question(std::ostream& out, const QuestionRecord& q);

}  // namespace kbqa
