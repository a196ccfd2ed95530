#ifndef SEQLABEL_TOOLS_CLI_HPP
#define SEQLABEL_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace seqlabel::cli {

/// Runs one command line (args excludes the program name). Reports go to
/// `out`; failures print a single "error: <reason>" line to `err`.
/// Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqlabel::cli

#endif  // SEQLABEL_TOOLS_CLI_HPP
