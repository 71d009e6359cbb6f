# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from typing import List

__all__ = ['NestedObject']


def _addindent(s_: str, num_spaces: int) -> str:
    s = s_.split('\n')
    # don't do anything for single-line stuff
    if len(s) == 1:
        return s_
    first = s.pop(0)
    s = [(num_spaces * ' ') + line for line in s]
    return first + '\n' + '\n'.join(s)


class NestedObject:
    """Base class for objects with a readable nested representation"""

    _children_names: List[str]

    def extra_repr(self) -> str:
        return ''

    def __repr__(self) -> str:
        extra_lines = []
        extra_repr = self.extra_repr()
        if extra_repr:
            extra_lines = extra_repr.split('\n')
        child_lines = []
        for key in getattr(self, '_children_names', []):
            child = getattr(self, key)
            if isinstance(child, list) and len(child) > 0:
                child_str = ",\n".join([repr(subchild) for subchild in child])
                if len(child) > 1:
                    child_str = _addindent(f"\n{child_str},", 2) + '\n'
                child_str = f"[{child_str}]"
            else:
                child_str = repr(child)
            child_lines.append('(' + key + '): ' + _addindent(child_str, 2))
        lines = extra_lines + child_lines

        main_str = self.__class__.__name__ + '('
        if lines:
            # simple one-liner info, which most builtin Modules will use
            if len(extra_lines) == 1 and not child_lines:
                main_str += extra_lines[0]
            else:
                main_str += '\n  ' + '\n  '.join(lines) + '\n'

        main_str += ')'
        return main_str
