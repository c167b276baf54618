import io
import json
from unittest.mock import patch

import numpy as np
import pytest

from app import create_app
from config import TestingConfig
from models import Dislocation, FingerCode, GrayImage, ScoreLog, SyntheticSpec, db
from models.minutia import template_from_points
from utils.fusion import Normalizer, NormalizerKind
from utils.imageio import encode_pgm, synthesize_fingerprint
from utils.matcher_ridge import format_fingercode
from utils.template_io import format_template

POINTS = [(50.0, 60.0, 10.0), (120.0, 80.0, 200.0), (90.0, 190.0, 45.0), (210.0, 150.0, 300.0)]

def template_upload(points=POINTS, name='a.fpt'):
    data = format_template(template_from_points(points, 300, 300)).encode('ascii')
    return io.BytesIO(data), name

def fingercode_upload(seed, name):
    rng = np.random.default_rng(seed)
    values = rng.uniform(size=(3, 4, 8))
    values /= np.linalg.norm(values, axis=2, keepdims=True)
    data = format_fingercode(FingerCode(values, np.ones((3, 4), dtype=bool), 16)).encode('ascii')
    return io.BytesIO(data), name

class TestMatchingApi:

    @pytest.fixture
    def app(self):
        """Create test application"""
        app = create_app('testing')
        app.config.from_object(TestingConfig)
        app.config['SQLALCHEMY_DATABASE_URI'] = 'sqlite:///:memory:'
        return app

    @pytest.fixture
    def client(self, app):
        """Create test client"""
        with app.test_client() as client:
            with app.app_context():
                db.create_all()
                yield client
                db.drop_all()

    def post_match(self, client, a, b, **form):
        form.update({'a': a, 'b': b})
        return client.post('/api/match', data=form, content_type='multipart/form-data')

    def test_root(self, client):
        """Test the service description"""
        response = client.get('/')
        assert response.status_code == 200
        data = json.loads(response.data)
        assert data['endpoints']['match'] == '/api/match'

    def test_health(self, client):
        """Test health with the database and pipeline available"""
        response = client.get('/health')
        data = json.loads(response.data)
        assert response.status_code == 200
        assert data['status'] == 'healthy'
        assert data['pipeline'] == 'configured'

    def test_liveness(self, client):
        """Test liveness without database access"""
        response = client.get('/health/live')
        assert json.loads(response.data)['status'] == 'alive'

    def test_match_templates(self, client):
        """Test an elastic match of uploaded templates is scored and logged"""
        response = self.post_match(client, template_upload(), template_upload(name='b.fpt'),
                                   matcher='elastic', label='genuine')
        assert response.status_code == 200
        data = json.loads(response.data)
        assert data['success'] == True
        assert data['raw'] == pytest.approx(1.0)
        assert data['counts'] == [4, 4]

        log = db.session.get(ScoreLog, data['score_id'])
        assert log.template_id == 'a.fpt'
        assert log.probe_id == 'b.fpt'
        assert log.label == 'genuine'

    def test_match_with_normalizer(self, app, client):
        """Test that a loaded normalizer fills the normalized score"""
        app.extensions['normalizers'] = {'ridge': Normalizer(NormalizerKind.EXP_DISSIM, 5.0, 'ridge')}
        response = self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(1, 'b.fc'),
                                   matcher='ridge', template_id='f000/i00', probe_id='f000/i01')
        data = json.loads(response.data)
        assert data['raw'] == 0.0
        assert data['normalized'] == 1.0

    def test_missing_file(self, client):
        """Test that both inputs are required"""
        response = client.post('/api/match', data={'a': template_upload(), 'matcher': 'elastic'},
                               content_type='multipart/form-data')
        assert response.status_code == 400
        assert json.loads(response.data)['error_code'] == 'MISSING_INPUT'

    def test_unknown_matcher(self, client):
        """Test matcher id validation"""
        response = self.post_match(client, template_upload(), template_upload(), matcher='bozorth')
        assert response.status_code == 400
        assert json.loads(response.data)['error_code'] == 'INVALID_CHOICE'

    def test_bad_label(self, client):
        """Test trial label validation"""
        response = self.post_match(client, template_upload(), template_upload(), matcher='elastic', label='maybe')
        assert response.status_code == 400

    def test_wrong_input_kind(self, client):
        """Test that the domain error reaches the client as a 400"""
        response = self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(2, 'b.fc'),
                                   matcher='compat')
        assert response.status_code == 400
        data = json.loads(response.data)
        assert data['success'] == False
        assert data['error_code'] == 'INPUT_TYPE_MISMATCH'

    def test_malformed_template(self, client):
        """Test that a broken template is reported with its error code"""
        broken = (io.BytesIO(b'FPT1 300 300 skeleton 2\n10 10 0.00 unknown 1.0\n'), 'broken.fpt')
        response = self.post_match(client, broken, template_upload(), matcher='elastic')
        assert response.status_code == 400
        assert json.loads(response.data)['error_code'] == 'MALFORMED_TEMPLATE'

    def test_database_error(self, client):
        """Test that a failed commit is reported"""
        with patch.object(db.session, 'commit', side_effect=Exception('disk full')):
            response = self.post_match(client, template_upload(), template_upload(), matcher='elastic')
        assert response.status_code == 500
        assert json.loads(response.data)['error_code'] == 'DATABASE_ERROR'

    def test_list_scores(self, client):
        """Test listing with a matcher filter and a limit"""
        for _ in range(3):
            self.post_match(client, template_upload(), template_upload(), matcher='elastic')
        self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(2, 'b.fc'), matcher='ridge')

        data = json.loads(client.get('/api/scores?matcher=elastic&limit=2').data)
        assert data['count'] == 2
        assert all(score['matcher'] == 'elastic' for score in data['scores'])
        assert data['scores'][0]['id'] > data['scores'][1]['id']

        response = client.get('/api/scores?limit=0')
        assert response.status_code == 400

    def test_summary(self, client):
        """Test EER per matcher over labeled logs, distances ranked as dissimilarities"""
        self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(1, 'b.fc'),
                        matcher='ridge', label='genuine')
        self.post_match(client, fingercode_upload(3, 'c.fc'), fingercode_upload(3, 'd.fc'),
                        matcher='ridge', label='genuine')
        self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(2, 'e.fc'),
                        matcher='ridge', label='impostor')
        self.post_match(client, fingercode_upload(1, 'a.fc'), fingercode_upload(4, 'f.fc'),
                        matcher='ridge')

        data = json.loads(client.get('/api/scores/summary').data)
        ridge = data['matchers']['ridge']
        assert ridge['genuine'] == 2 and ridge['impostor'] == 1
        assert ridge['eer'] == 0.0
        assert ridge['auc'] == 1.0

class TestExtractApi:

    @pytest.fixture
    def client(self):
        """Create test client"""
        app = create_app('testing')
        with app.test_client() as client:
            with app.app_context():
                db.create_all()
                yield client
                db.drop_all()

    def test_extract(self, client):
        """Test a template is extracted from an uploaded print"""
        spec = SyntheticSpec(width=128, height=128, dislocations=(Dislocation(64.0, 64.0, 1),))
        image, _ = synthesize_fingerprint(spec)
        response = client.post('/api/extract', data={'image': (io.BytesIO(encode_pgm(image)), 'print.pgm')},
                               content_type='multipart/form-data')
        assert response.status_code == 200
        data = json.loads(response.data)
        assert data['method'] == 'symmetry'
        assert data['template_text'].startswith('FPT1 128 128')

    def test_missing_image(self, client):
        """Test that an image is required"""
        response = client.post('/api/extract', data={}, content_type='multipart/form-data')
        assert json.loads(response.data)['error_code'] == 'MISSING_IMAGE'

    def test_bad_method(self, client):
        """Test extraction method validation"""
        image = GrayImage(np.zeros((32, 32), dtype=np.uint8))
        response = client.post('/api/extract', data={'image': (io.BytesIO(encode_pgm(image)), 'p.pgm'),
                                                      'method': 'ridge-count'},
                               content_type='multipart/form-data')
        assert response.status_code == 400

    def test_template_upload_refused(self, client):
        """Test that only images can be extracted from"""
        response = client.post('/api/extract', data={'image': template_upload()}, content_type='multipart/form-data')
        assert json.loads(response.data)['error_code'] == 'INPUT_TYPE_MISMATCH'

    def test_truncated_image(self, client):
        """Test that a truncated PGM payload is a client error"""
        image = GrayImage(np.zeros((32, 32), dtype=np.uint8))
        data = encode_pgm(image)[:-10]
        response = client.post('/api/extract', data={'image': (io.BytesIO(data), 'p.pgm')},
                               content_type='multipart/form-data')
        assert response.status_code == 400
        assert json.loads(response.data)['error_code'] == 'TRUNCATED_PAYLOAD'

if __name__ == '__main__':
    pytest.main([__file__])
