"""Shared fixtures: canonical spec sources used across the suite."""

import pytest

MESSAGE_SRC = """\
typedef struct _message {
  UINT8 first { first > 42 };
  UINT8 second;
} message;
"""

MESSAGE_RENAMED_SRC = """\
typedef struct _msg {
  UINT8 a { a > 42 };
  UINT8 b;
} msg;
"""

MESSAGE_LOOSE_SRC = """\
typedef struct _message {
  UINT8 first;
  UINT8 second;
} message;
"""

OPTION_SRC = """\
typedef struct _MAX_SEG_SIZE {
   UINT8 Length;
   UINT16BE MaxSegSize;
} MAX_SEG_SIZE;

casetype _OPTION_OF_KIND(UINT8 Kind) {
    switch (Kind) {
        case 0x00: unit case0; /*unit: empty payload*/
        case 0x01: unit case1; /*unit: empty payload*/
        case 0x02: MAX_SEG_SIZE case2;
    }
} OPTION_OF_KIND;

typedef struct _OPTION {
    UINT8 Kind {
        Kind == 0x00 ||
        Kind == 0x01 ||
        Kind == 0x02
    };
    OPTION_OF_KIND(Kind) payload;
} OPTION;
"""

ALWAYS_FAIL_SRC = "typedef struct _never { UINT8 x { x > 255 }; } never;\n"

# four byte values that straddle the message spec's constraint boundary
SMALL_ALPHABET = (0x00, 0x2A, 0x2B, 0xFF)


@pytest.fixture(scope="session")
def message_spec():
    from tdforge.frontend import check
    return check(MESSAGE_SRC)


@pytest.fixture(scope="session")
def option_spec():
    from tdforge.frontend import check
    return check(OPTION_SRC)
