"""UTC timestamp helpers. Instants are integer (or float) seconds since the epoch."""

import calendar
import time
from datetime import date, datetime, timezone
from functools import lru_cache

SLOT_SECONDS = 120
SLOTS_PER_DAY = 86400 // SLOT_SECONDS


@lru_cache(maxsize=8192)
def parse_timestamp(text):
    """Parse ``YYYY-MM-DDTHH:MM:SS[.frac]Z`` into epoch seconds.

    Whole-second inputs return an ``int``. Raises ``ValueError`` on anything else.
    """
    if len(text) < 20 or text[-1] != "Z" or text[4] != "-" or text[7] != "-" \
            or text[10] != "T" or text[13] != ":" or text[16] != ":":
        raise ValueError(f"unparseable timestamp {text!r}")
    try:
        fields = (int(text[0:4]), int(text[5:7]), int(text[8:10]),
                  int(text[11:13]), int(text[14:16]), int(text[17:19]))
        frac = text[19:-1]
        extra = float("0" + frac) if frac else 0
        if frac and (frac[0] != "." or len(frac) < 2):
            raise ValueError
        # round-trip through datetime to reject e.g. February 30th
        datetime(*fields)
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}") from None
    secs = calendar.timegm(fields)
    return secs + extra if extra else secs


def format_timestamp(epoch):
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(epoch))


def date_to_epoch(d: date) -> int:
    return calendar.timegm((d.year, d.month, d.day, 0, 0, 0))


def epoch_to_date(epoch) -> date:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).date()
