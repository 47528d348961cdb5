#include "kbqa/question_io.hpp"

#include <istream>
#include <ostream>

namespace kbqa {

std::vector<QuestionRecord> read_questions(std::istream& in,
                                           std::vector<IngestError>* errors,
                                           std::string_view source) {
  std::vector<QuestionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (fields.size() < 3) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      if (errors) {
        errors->push_back({std::string(source), line_no,
                           "expected subject, predicate, object and text"});
      }
      continue;
    }
    out.push_back({std::to_string(line_no), std::move(fields[0]),
                   std::move(fields[1]), std::move(fields[2]),
                   line.substr(start)});
  }
  return out;
}

void write_question(std::ostream& out, const QuestionRecord& q) {
  out << q.subject << '\t' << q.predicate << '\t' << q.object << '\t' << q.text
      << '\n';
}

}  // namespace kbqa
