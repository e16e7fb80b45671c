"""Differential fault analysis toolkit for AES.

The modules cover the attack end to end: a traceable AES core (`aes`),
fault injection and campaign simulation (`faults`, `campaign`), a keyslot
engine emulator with the short-input borrow quirk (`engine`), fault
localization against a known key (`localizer`), the DFA solver (`dfa`),
campaign-level attack orchestration (`orchestrator`), borrow-chain
brute force (`buster`), and campaign statistics (`analyze`). `cli` wires
everything into one command-line tool.
"""

__version__ = "0.1.0"
