"""Minutiae template text format.

Line 1 is ``FPT1 <width> <height> <count> <source>``; then one
``x y direction kind quality`` line per minutia, kind in {T, B, U}.
Directions are written with two decimals, everything else exactly.
"""
import logging
from typing import List

from models.minutia import Minutia, MinutiaKind, MinutiaTemplate, TemplateSource
from utils.errors import TemplateFormatError

logger = logging.getLogger(__name__)

TEMPLATE_MAGIC = 'FPT1'


def _format_direction(direction: float) -> str:
    text = f'{direction:.2f}'
    return '0.00' if text == '360.00' else text


def format_template(template: MinutiaTemplate) -> str:
    lines = [f'{TEMPLATE_MAGIC} {template.width} {template.height} {len(template)} {template.source.value}']
    for m in template:
        lines.append(f'{m.x!r} {m.y!r} {_format_direction(m.direction)} {m.kind.code} {m.quality!r}')
    return '\n'.join(lines) + '\n'


def parse_template(text: str) -> MinutiaTemplate:
    lines = text.splitlines()
    if not lines:
        raise TemplateFormatError('empty template file', 1)

    header = lines[0].split()
    if len(header) != 5 or header[0] != TEMPLATE_MAGIC:
        raise TemplateFormatError(f'expected "{TEMPLATE_MAGIC} width height count source"', 1)
    try:
        width, height, count = int(header[1]), int(header[2]), int(header[3])
        source = TemplateSource(header[4])
    except ValueError as e:
        raise TemplateFormatError(f'bad header: {e}', 1)

    minutiae: List[Minutia] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 5:
            raise TemplateFormatError(f'expected 5 fields, got {len(fields)}', line_number)
        try:
            x, y, direction, quality = float(fields[0]), float(fields[1]), float(fields[2]), float(fields[4])
            kind = MinutiaKind.from_code(fields[3])
        except (ValueError, KeyError):
            raise TemplateFormatError(f'malformed record "{line}"', line_number)

        if not 0.0 <= direction < 360.0:
            raise TemplateFormatError(f'direction {direction} outside [0, 360)', line_number)
        if not 0.0 <= quality <= 1.0:
            raise TemplateFormatError(f'quality {quality} outside [0, 1]', line_number)
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise TemplateFormatError(f'minutia ({x}, {y}) outside the {width}x{height} image', line_number)
        minutiae.append(Minutia(x, y, direction, kind, quality))

    if len(minutiae) != count:
        raise TemplateFormatError(f'header announces {count} minutiae, found {len(minutiae)}', len(lines))
    return MinutiaTemplate(tuple(minutiae), width, height, source)


def write_template(template: MinutiaTemplate, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_template(template))


def read_template(path: str) -> MinutiaTemplate:
    with open(path, 'r', encoding='utf-8') as handle:
        template = parse_template(handle.read())
    logger.debug(f'Read {len(template)} minutiae from {path}')
    return template


def is_template_data(data: bytes) -> bool:
    return data[:len(TEMPLATE_MAGIC)] == TEMPLATE_MAGIC.encode('ascii')
