"""
Presets Module
Named symbols b and test functions, stored as YAML and resolved by the CLI.
"""

from typing import Dict, List, Optional
import os

import yaml

from config import deep_merge

SINGULAR_AT_ONE = {'type': 'singular_inner', 'atoms': [{'xi': [1.0, 0.0], 'mass': 1.0}]}
HALF_SINGULAR_B = {
    'type': 'scale',
    'factor': [0.5, 0.0],
    'expr': {'type': 'sum', 'terms': [{'type': 'poly', 'coeffs': [[1.0, 0.0]]}, SINGULAR_AT_ONE]}
}


def _poly(*coeffs: float) -> Dict:
    return {'type': 'poly', 'coeffs': [[float(c), 0.0] for c in coeffs]}


class PresetManager:
    """Manages built-in and custom presets."""

    def __init__(self, presets_dir: str = "presets"):
        self.presets_dir = presets_dir
        self.default_presets = self._create_default_presets()

    def _create_default_presets(self) -> Dict:
        return {
            'half_z': {
                'name': 'b = (1+z)/2',
                'description': 'Rational symbol with one boundary node at 1',
                'category': 'space',
                'spec': {'kind': 'rational', 'b': _poly(0.5, 0.5)}
            },
            'half_one_minus_z2': {
                'name': 'b = (1-z^2)/2',
                'description': 'Rational symbol with nodes at i and -i',
                'category': 'space',
                'spec': {'kind': 'rational', 'b': _poly(0.5, 0.0, -0.5)}
            },
            'half_z3': {
                'name': 'b = (1+z^3)/2',
                'description': 'Rational symbol with nodes at the cube roots of -1',
                'category': 'space',
                'spec': {'kind': 'rational', 'b': _poly(0.5, 0.0, 0.0, 0.5)}
            },
            'constant_half': {
                'name': 'b = 1/2',
                'description': 'Constant symbol; H(b) is H2 with an equivalent norm',
                'category': 'space',
                'spec': {'kind': 'rational', 'b': _poly(0.5)}
            },
            'half_inner_z': {
                'name': 'b = (1+I)/2, I = z',
                'description': 'The symbol (1+z)/2 seen through its Clark atoms',
                'category': 'space',
                'spec': {'kind': 'half_inner', 'inner': _poly(0.0, 1.0)}
            },
            'half_singular': {
                'name': 'b = (1+S)/2',
                'description': 'S the singular inner function with a unit atom at 1',
                'category': 'space',
                'spec': {'kind': 'half_inner', 'inner': SINGULAR_AT_ONE}
            },
            'factored_singular': {
                'name': 'b = (1+z)/2 S',
                'description': 'Outer part (1+z)/2 times the singular inner function at 1',
                'category': 'space',
                'spec': {'kind': 'factored', 'outer': _poly(0.5, 0.5), 'blaschke': [],
                         'atoms': [{'xi': [1.0, 0.0], 'mass': 1.0}]}
            },
            'one': {
                'name': 'f = 1',
                'description': 'Constant function',
                'category': 'function',
                'spec': _poly(1.0)
            },
            'one_plus_z': {
                'name': 'f = 1+z',
                'description': 'Outer polynomial with a zero at -1',
                'category': 'function',
                'spec': _poly(1.0, 1.0)
            },
            'z_minus_one': {
                'name': 'f = z-1',
                'description': 'Outer polynomial vanishing at 1',
                'category': 'function',
                'spec': _poly(-1.0, 1.0)
            },
            'kernel_half_singular': {
                'name': 'f = k_0 for b = (1+S)/2',
                'description': 'Reproducing kernel at the origin of the half-singular space',
                'category': 'function',
                'spec': {'type': 'hb_kernel', 'b': HALF_SINGULAR_B, 'point': [0.0, 0.0]},
                'settings': {'clark_n': 128}
            }
        }

    def export_defaults(self) -> List[str]:
        """
        Write the built-in presets as YAML files, as templates for custom ones.

        Returns:
            Paths written
        """
        paths = []
        for preset_id, preset_data in self.default_presets.items():
            self.save_preset(preset_id, preset_data)
            paths.append(os.path.join(self.presets_dir, f"{preset_id}.yaml"))
        return paths

    def get_preset(self, preset_id: str) -> Optional[Dict]:
        """
        Get preset by ID.

        Args:
            preset_id: Preset identifier

        Returns:
            Preset dictionary or None
        """
        if preset_id in self.default_presets:
            return self.default_presets[preset_id]

        preset_path = os.path.join(self.presets_dir, f"{preset_id}.yaml")
        if os.path.exists(preset_path):
            with open(preset_path, 'r') as f:
                return yaml.safe_load(f)

        return None

    def list_presets(self, category: Optional[str] = None) -> List[Dict]:
        """List built-in and saved presets, optionally one category only."""
        presets = []
        seen = set()
        for preset_id, preset_data in self.default_presets.items():
            presets.append({
                'id': preset_id,
                'name': preset_data['name'],
                'description': preset_data['description'],
                'category': preset_data['category']
            })
            seen.add(preset_id)

        saved = sorted(os.listdir(self.presets_dir)) if os.path.isdir(self.presets_dir) else []
        for filename in saved:
            if not filename.endswith('.yaml') or filename[:-5] in seen:
                continue
            preset_id = filename[:-5]
            try:
                with open(os.path.join(self.presets_dir, filename), 'r') as f:
                    preset_data = yaml.safe_load(f) or {}
            except yaml.YAMLError:
                continue
            presets.append({
                'id': preset_id,
                'name': preset_data.get('name', preset_id),
                'description': preset_data.get('description', ''),
                'category': preset_data.get('category', 'function')
            })

        if category:
            presets = [p for p in presets if p['category'] == category]
        return presets

    def save_preset(self, preset_id: str, preset_data: Dict):
        """
        Save a custom preset.

        Args:
            preset_id: Preset identifier
            preset_data: Dictionary with name, description, category and spec
        """
        os.makedirs(self.presets_dir, exist_ok=True)
        preset_path = os.path.join(self.presets_dir, f"{preset_id}.yaml")
        with open(preset_path, 'w') as f:
            yaml.dump(preset_data, f, default_flow_style=False)

    def delete_preset(self, preset_id: str):
        preset_path = os.path.join(self.presets_dir, f"{preset_id}.yaml")
        if os.path.exists(preset_path):
            os.remove(preset_path)

    def apply_preset(self, preset_id: str, base_settings: Dict) -> Dict:
        """Merge the preset's settings block over base settings."""
        preset = self.get_preset(preset_id)
        if not preset:
            return base_settings
        return deep_merge(base_settings, preset.get('settings', {}))
