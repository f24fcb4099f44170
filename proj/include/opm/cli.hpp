#pragma once
namespace opm { inline int cli_main(int, char**) { return 1; } }
