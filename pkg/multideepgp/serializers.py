"""Serializers validating run-configuration sections; every value arrives as a string."""
from rest_framework import serializers

METHODS = ('multideepgp', 'multidnn', 'kriging')
NULL_WORDS = {'', 'none', 'null', 'off'}


class StrictSerializer(serializers.Serializer):
    """Rejects keys the section does not declare."""

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


class CommaSeparatedField(serializers.Field):
    """``'100,100'`` -> ``[100, 100]`` with each item validated by ``child``."""

    def __init__(self, child=None, allow_empty=True, **kwargs):
        self.child = child or serializers.CharField()
        self.allow_empty = allow_empty
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, (list, tuple)):
            items = list(data)
        else:
            items = [item.strip() for item in str(data).split(',') if item.strip()]
        if not items and not self.allow_empty:
            raise serializers.ValidationError('At least one item is required.')
        return [self.child.run_validation(item) for item in items]

    def to_representation(self, value):
        return ','.join(str(item) for item in value)


class NullableFloatField(serializers.FloatField):
    def __init__(self, **kwargs):
        kwargs.setdefault('allow_null', True)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if data is None or str(data).strip().lower() in NULL_WORDS:
            return None
        return super().to_internal_value(data)

    def validate_empty_values(self, data):
        if isinstance(data, str) and data.strip().lower() in NULL_WORDS:
            return True, None
        return super().validate_empty_values(data)


class NullableIntegerField(serializers.IntegerField):
    def __init__(self, **kwargs):
        kwargs.setdefault('allow_null', True)
        super().__init__(**kwargs)

    def validate_empty_values(self, data):
        if isinstance(data, str) and data.strip().lower() in NULL_WORDS:
            return True, None
        return super().validate_empty_values(data)


class OutcomeField(serializers.CharField):
    """``name:kind`` or ``name:binary:threshold``."""

    def to_internal_value(self, data):
        parts = [p.strip() for p in super().to_internal_value(data).split(':')]
        if len(parts) not in (2, 3) or parts[1] not in ('binary', 'count', 'continuous'):
            raise serializers.ValidationError(f'Expected name:kind[:threshold], got {data!r}.')
        if not parts[0].isidentifier():
            raise serializers.ValidationError(f'Outcome name {parts[0]!r} is not an identifier.')
        outcome = {'name': parts[0], 'kind': parts[1]}
        if len(parts) == 3:
            if parts[1] != 'binary':
                raise serializers.ValidationError('Only binary outcomes take a threshold.')
            outcome['threshold'] = serializers.FloatField().run_validation(parts[2])
        return outcome


class DataSerializer(StrictSerializer):
    source = serializers.ChoiceField(choices=['case1', 'case2', 'survey', 'csv'], default='case1')
    path = serializers.CharField(required=False, allow_blank=True, default='')
    outcomes = CommaSeparatedField(
        child=OutcomeField(),
        required=False,
        default=[
            {'name': 'binary', 'kind': 'binary'},
            {'name': 'count', 'kind': 'count'},
            {'name': 'continuous', 'kind': 'continuous'},
        ],
    )
    coord_columns = CommaSeparatedField(required=False, default=['x'], allow_empty=False)
    covariate_columns = CommaSeparatedField(required=False, default=[])
    train_frac = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.8)

    def validate(self, attrs):
        if attrs['source'] == 'csv' and not attrs['path']:
            raise serializers.ValidationError({'path': ['Required when source is csv.']})
        if not 0 < attrs['train_frac'] < 1:
            raise serializers.ValidationError({'train_frac': ['Must lie strictly between 0 and 1.']})
        if len(attrs['coord_columns']) > 2:
            raise serializers.ValidationError({'coord_columns': ['At most two coordinate columns.']})
        return attrs


class Case1Serializer(StrictSerializer):
    n = serializers.IntegerField(min_value=2, default=1000)
    mu = serializers.FloatField(default=1.0)
    sigma2 = serializers.FloatField(min_value=0.0, default=1.0)
    rho = serializers.FloatField(min_value=0.0, default=0.1)
    tau2 = serializers.FloatField(min_value=0.0, default=0.01)
    c = serializers.FloatField(default=1.0)
    kappa = serializers.FloatField(min_value=0.0, default=0.35)
    alpha = serializers.FloatField(default=-0.25)
    beta = serializers.FloatField(default=0.60)
    train_count = serializers.IntegerField(min_value=1, default=800)

    def validate(self, attrs):
        if attrs['train_count'] >= attrs['n']:
            raise serializers.ValidationError({'train_count': ['Must be smaller than n.']})
        for name in ('sigma2', 'rho', 'tau2', 'kappa'):
            if attrs[name] <= 0:
                raise serializers.ValidationError({name: ['Must be positive.']})
        return attrs


class Case2Serializer(StrictSerializer):
    n = serializers.IntegerField(min_value=2, default=900)
    alpha = serializers.FloatField(default=0.5)
    beta = serializers.FloatField(default=3.0)
    sigma2 = serializers.FloatField(min_value=0.0, default=0.25)
    train_frac = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.8)
    layout = serializers.ChoiceField(choices=['uniform', 'grid'], default='uniform')

    def validate(self, attrs):
        if attrs['sigma2'] <= 0:
            raise serializers.ValidationError({'sigma2': ['Must be positive.']})
        if not 0 < attrs['train_frac'] < 1:
            raise serializers.ValidationError({'train_frac': ['Must lie strictly between 0 and 1.']})
        return attrs


class SurveySerializer(StrictSerializer):
    n = serializers.IntegerField(min_value=2, default=600)
    lon_min = serializers.FloatField(default=28.0)
    lon_max = serializers.FloatField(default=36.0)
    lat_min = serializers.FloatField(default=-5.0)
    lat_max = serializers.FloatField(default=3.0)
    vegetation_threshold = serializers.FloatField(default=0.2)
    water_sd = serializers.FloatField(min_value=0.0, default=0.25)
    missing_frac = serializers.FloatField(min_value=0.0, max_value=0.99, default=0.05)
    train_frac = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.75)

    def validate(self, attrs):
        if attrs['lon_min'] >= attrs['lon_max'] or attrs['lat_min'] >= attrs['lat_max']:
            raise serializers.ValidationError('Survey bounding box is empty.')
        if not 0 < attrs['train_frac'] < 1:
            raise serializers.ValidationError({'train_frac': ['Must lie strictly between 0 and 1.']})
        return attrs


class BasisSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['coords', 'tps'], default='tps')
    grid = serializers.IntegerField(min_value=2, default=25)
    mask = serializers.ChoiceField(choices=['none', 'hull'], default='none')


class NetSerializer(StrictSerializer):
    hidden_widths = CommaSeparatedField(child=serializers.IntegerField(min_value=1), default=[100, 100])
    activation = serializers.ChoiceField(choices=['relu', 'tanh', 'identity'], default='relu')
    keep_prob = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.9)
    head_keep_prob = NullableFloatField(min_value=0.0, max_value=1.0, required=False, default=None)

    def validate(self, attrs):
        for key in ('keep_prob', 'head_keep_prob'):
            if attrs.get(key) is not None and attrs[key] <= 0:
                raise serializers.ValidationError({key: ['Must lie in (0, 1].']})
        return attrs


class TrainSerializer(StrictSerializer):
    epochs = serializers.IntegerField(min_value=0, default=200)
    batch_size = serializers.IntegerField(min_value=1, default=128)
    learning_rate = serializers.FloatField(min_value=0.0, default=1e-3)
    optimizer = serializers.ChoiceField(choices=['adam', 'sgd'], default='adam')
    beta1 = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.9)
    beta2 = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.999)
    epsilon = serializers.FloatField(min_value=0.0, default=1e-8)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)
    gradient_clip = NullableFloatField(min_value=0.0, required=False, default=5.0)
    per_row_masks = serializers.BooleanField(default=False)
    patience = NullableIntegerField(min_value=1, required=False, default=None)
    min_delta = serializers.FloatField(min_value=0.0, default=0.0)

    def validate(self, attrs):
        if attrs['learning_rate'] <= 0:
            raise serializers.ValidationError({'learning_rate': ['Must be positive.']})
        if attrs.get('gradient_clip') is not None and attrs['gradient_clip'] <= 0:
            raise serializers.ValidationError({'gradient_clip': ['Must be positive or none.']})
        return attrs


class PredictSerializer(StrictSerializer):
    m_draws = serializers.IntegerField(min_value=1, default=200)
    level = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.95)
    y_sample_per_draw = serializers.IntegerField(min_value=1, default=20)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)

    def validate_level(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('Must lie strictly between 0 and 1.')
        return value


class KrigingSerializer(StrictSerializer):
    variant = serializers.ChoiceField(choices=['ordinary', 'simple'], default='ordinary')
    count_transform = serializers.ChoiceField(choices=['log1p', 'identity'], default='log1p')
    n_bins = serializers.IntegerField(min_value=3, default=15)
    max_dist_frac = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.5)
    refine_steps = serializers.IntegerField(min_value=0, default=3)

    def validate_max_dist_frac(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value


class BenchSerializer(StrictSerializer):
    replicates = serializers.IntegerField(min_value=1, default=100)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)
    methods = CommaSeparatedField(
        child=serializers.ChoiceField(choices=list(METHODS)), default=list(METHODS), allow_empty=False
    )
    workers = serializers.IntegerField(min_value=1, default=1)

    def validate_methods(self, value):
        return [method for method in METHODS if method in value]


SECTION_SERIALIZERS = {
    'data': DataSerializer,
    'case1': Case1Serializer,
    'case2': Case2Serializer,
    'survey': SurveySerializer,
    'basis': BasisSerializer,
    'net': NetSerializer,
    'train': TrainSerializer,
    'predict': PredictSerializer,
    'kriging': KrigingSerializer,
    'bench': BenchSerializer,
}
