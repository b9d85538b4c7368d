import dataclasses

from nr_cba.codebook import CodebookConfig


def unchecked_config(**overrides) -> CodebookConfig:
    """CodebookConfig that skips validation, for degenerate single-port shapes."""
    cfg = object.__new__(CodebookConfig)
    for f in dataclasses.fields(CodebookConfig):
        object.__setattr__(cfg, f.name, overrides.get(f.name, f.default))
    return cfg


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
